use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use crate::error::{Error, Result};

/// Indexed triangle mesh. Vertices with bit-identical coordinates are welded
/// on construction so that edge sharing can be checked.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub positions: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(positions: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= positions.len())) {
            return Err(Error::InvalidInput(format!(
                "triangle {t:?} references a vertex beyond {}",
                positions.len()
            )));
        }
        let mut remap = Vec::with_capacity(positions.len());
        let mut unique: Vec<[f64; 3]> = Vec::new();
        let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
        for p in &positions {
            let key = p.map(|c| (c + 0.0).to_bits());
            let id = *seen.entry(key).or_insert_with(|| {
                unique.push(*p);
                unique.len() - 1
            });
            remap.push(id);
        }
        let triangles = triangles
            .into_iter()
            .map(|t| t.map(|i| remap[i]))
            .filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
            .collect();
        Ok(Self {
            positions: unique,
            triangles,
        })
    }

    /// Loads `.stl` (ASCII or binary) or `.obj` by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "stl" => Self::load_stl(path),
            "obj" => Self::load_obj(path),
            _ => Err(Error::InvalidInput(format!(
                "unsupported mesh format `{}` (expected .stl or .obj)",
                path.display()
            ))),
        }
    }

    pub fn load_stl(path: &Path) -> Result<Self> {
        let mut reader = BufReader::new(File::open(path)?);
        let mesh = stl_io::read_stl(&mut reader)?;
        let positions = mesh
            .vertices
            .iter()
            .map(|v| [v[0] as f64, v[1] as f64, v[2] as f64])
            .collect();
        let triangles = mesh.faces.iter().map(|f| f.vertices).collect();
        Self::new(positions, triangles)
    }

    pub fn load_obj(path: &Path) -> Result<Self> {
        let opts = tobj::LoadOptions {
            triangulate: false,
            single_index: false,
            ..Default::default()
        };
        let (models, _) = tobj::load_obj(path, &opts)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let mut positions = Vec::new();
        let mut triangles = Vec::new();
        for model in models {
            let m = model.mesh;
            if m.face_arities.iter().any(|&a| a != 3) {
                return Err(Error::InvalidInput(format!(
                    "{}: only triangle faces are supported",
                    path.display()
                )));
            }
            let base = positions.len();
            positions.extend(
                m.positions
                    .chunks_exact(3)
                    .map(|p| [p[0] as f64, p[1] as f64, p[2] as f64]),
            );
            triangles.extend(m.indices.chunks_exact(3).map(|t| {
                [
                    base + t[0] as usize,
                    base + t[1] as usize,
                    base + t[2] as usize,
                ]
            }));
        }
        Self::new(positions, triangles)
    }

    /// Writes binary STL.
    pub fn save_stl(&self, path: &Path) -> Result<()> {
        let tris: Vec<stl_io::Triangle> = self
            .triangles
            .iter()
            .map(|t| {
                let p = t.map(|i| self.positions[i]);
                let n = normalize(cross(sub(p[1], p[0]), sub(p[2], p[0])));
                stl_io::Triangle {
                    normal: stl_io::Normal::new(n.map(|c| c as f32)),
                    vertices: p.map(|v| stl_io::Vertex::new(v.map(|c| c as f32))),
                }
            })
            .collect();
        let mut f = File::create(path)?;
        stl_io::write_stl(&mut f, tris.iter())?;
        Ok(())
    }

    /// Number of undirected edges not shared by exactly two triangles.
    pub fn open_edge_count(&self) -> usize {
        let mut count: HashMap<(usize, usize), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count.values().filter(|&&c| c != 2).count()
    }

    pub fn check_watertight(&self) -> Result<()> {
        if self.triangles.is_empty() {
            return Err(Error::InvalidInput("mesh has no triangles".into()));
        }
        match self.open_edge_count() {
            0 => Ok(()),
            open_edges => Err(Error::NonWatertight { open_edges }),
        }
    }

    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.positions {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    pub fn translated(&self, t: [f64; 3]) -> Self {
        Self {
            positions: self
                .positions
                .iter()
                .map(|p| [p[0] + t[0], p[1] + t[1], p[2] + t[2]])
                .collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Closed axis-aligned box with outward-facing triangles.
    pub fn cuboid(lo: [f64; 3], hi: [f64; 3]) -> Self {
        let mut positions = Vec::with_capacity(8);
        for c in 0..8 {
            positions.push([
                if c & 1 == 0 { lo[0] } else { hi[0] },
                if c & 2 == 0 { lo[1] } else { hi[1] },
                if c & 4 == 0 { lo[2] } else { hi[2] },
            ]);
        }
        let quads = [
            [0, 4, 6, 2],
            [1, 3, 7, 5],
            [0, 1, 5, 4],
            [2, 6, 7, 3],
            [0, 2, 3, 1],
            [4, 5, 7, 6],
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        Self::new(positions, triangles).expect("static topology")
    }

    /// Subdivided icosahedron projected onto a sphere.
    pub fn icosphere(center: [f64; 3], radius: f64, subdivisions: u32) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut pos: Vec<[f64; 3]> = vec![
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .into_iter()
        .map(normalize)
        .collect();
        let mut tris: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, pos: &mut Vec<[f64; 3]>| {
                *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let m = [
                        (pos[a][0] + pos[b][0]) / 2.0,
                        (pos[a][1] + pos[b][1]) / 2.0,
                        (pos[a][2] + pos[b][2]) / 2.0,
                    ];
                    pos.push(normalize(m));
                    pos.len() - 1
                })
            };
            let mut next = Vec::with_capacity(tris.len() * 4);
            for [a, b, c] in tris {
                let ab = midpoint(a, b, &mut pos);
                let bc = midpoint(b, c, &mut pos);
                let ca = midpoint(c, a, &mut pos);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            tris = next;
        }
        let positions = pos
            .into_iter()
            .map(|p| {
                [
                    center[0] + radius * p[0],
                    center[1] + radius * p[1],
                    center[2] + radius * p[2],
                ]
            })
            .collect();
        Self::new(positions, tris).expect("static topology")
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    if n == 0.0 {
        a
    } else {
        [a[0] / n, a[1] / n, a[2] / n]
    }
}
