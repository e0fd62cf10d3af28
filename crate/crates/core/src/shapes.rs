//! Procedural benchmark shapes.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voxgrid::VoxelGrid;

/// Default voxel edge length for generated shapes, meters.
pub const DEFAULT_VOXEL_SIZE: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Cube,
    /// `res × res × max(1, res/8)` slab.
    Plate,
    /// `res × max(1, res/4) × max(1, res/4)` beam.
    Bar,
    /// Open-top box with one-voxel walls.
    HollowBox,
    /// L-shaped extrusion of thickness `max(1, res/4)`.
    L,
    /// Thresholded smooth value noise; largest component kept.
    Blob { seed: u64 },
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeKind::Cube => write!(f, "cube"),
            ShapeKind::Plate => write!(f, "plate"),
            ShapeKind::Bar => write!(f, "bar"),
            ShapeKind::HollowBox => write!(f, "hollow-box"),
            ShapeKind::L => write!(f, "l"),
            ShapeKind::Blob { seed } => write!(f, "blob:{seed}"),
        }
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    /// Accepts `cube`, `plate`, `bar`, `hollow-box`, `l`, `blob` or `blob:<seed>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Ok(match lower.as_str() {
            "cube" => ShapeKind::Cube,
            "plate" => ShapeKind::Plate,
            "bar" => ShapeKind::Bar,
            "hollow-box" | "hollowbox" => ShapeKind::HollowBox,
            "l" => ShapeKind::L,
            "blob" => ShapeKind::Blob { seed: 0 },
            other => match other.strip_prefix("blob:") {
                Some(seed) => ShapeKind::Blob {
                    seed: seed
                        .parse()
                        .map_err(|_| Error::InvalidInput(format!("bad blob seed `{seed}`")))?,
                },
                None => return Err(Error::InvalidInput(format!("unknown shape `{s}`"))),
            },
        })
    }
}

/// A named benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchShape {
    pub name: String,
    pub kind: ShapeKind,
    pub res: u32,
}

impl BenchShape {
    pub fn new(kind: ShapeKind, res: u32) -> Self {
        Self {
            name: format!("{kind}-{res}"),
            kind,
            res,
        }
    }

    pub fn generate(&self, h: f64) -> Result<VoxelGrid> {
        gen_shape(self.kind, self.res, h)
    }
}

/// The desk-scale benchmark set. Every shape stays within 600 degrees of
/// freedom so the dense oracle applies.
pub fn bench_shapes() -> Vec<BenchShape> {
    vec![
        BenchShape::new(ShapeKind::Cube, 4),
        BenchShape::new(ShapeKind::Plate, 8),
        BenchShape::new(ShapeKind::Bar, 8),
        BenchShape::new(ShapeKind::HollowBox, 5),
        BenchShape::new(ShapeKind::L, 8),
        BenchShape::new(ShapeKind::Blob { seed: 7 }, 6),
    ]
}

pub fn gen_shape(kind: ShapeKind, res: u32, h: f64) -> Result<VoxelGrid> {
    if !(1..=64).contains(&res) {
        return Err(Error::InvalidInput(format!(
            "shape resolution must be in 1..=64, got {res}"
        )));
    }
    let thin = |d: u32| (res / d).max(1);
    let (dims, voxels): ([u32; 3], Vec<[u32; 3]>) = match kind {
        ShapeKind::Cube => ([res; 3], fill([res; 3], |_| true)),
        ShapeKind::Plate => {
            let d = [res, res, thin(8)];
            (d, fill(d, |_| true))
        }
        ShapeKind::Bar => {
            let d = [res, thin(4), thin(4)];
            (d, fill(d, |_| true))
        }
        ShapeKind::HollowBox => {
            if res < 3 {
                return Err(Error::InvalidInput("hollow-box needs res >= 3".into()));
            }
            let d = [res; 3];
            let wall = |u: [u32; 3]| {
                let inner_xy = (1..res - 1).contains(&u[0]) && (1..res - 1).contains(&u[1]);
                !(inner_xy && u[2] >= 1)
            };
            (d, fill(d, wall))
        }
        ShapeKind::L => {
            let d = [res, res, thin(4)];
            let arm = (res / 2).max(1);
            (d, fill(d, |u| u[0] < arm || u[1] < arm))
        }
        ShapeKind::Blob { seed } => {
            let d = [res; 3];
            let noise = ValueNoise::new(seed, 4);
            let c = (res as f64 - 1.0) / 2.0;
            let voxels = fill(d, |u| {
                let p = u.map(|v| (v as f64 - c) / res as f64);
                let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                let q = u.map(|v| (v as f64 + 0.5) / res as f64);
                0.45 * noise.sample(q) + 0.55 * (1.0 - 2.0 * r) > 0.3
            });
            (d, voxels)
        }
    };
    let grid = VoxelGrid::new(dims, h, [0.0; 3], voxels)?;
    let grid = if matches!(kind, ShapeKind::Blob { .. }) {
        grid.connected_components()
            .into_iter()
            .next()
            .ok_or_else(|| Error::InvalidInput(format!("{kind} at res {res} is empty")))?
    } else {
        grid
    };
    let min = if matches!(kind, ShapeKind::Blob { .. }) { 8 } else { 1 };
    if grid.num_voxels() < min {
        return Err(Error::InvalidInput(format!(
            "{kind} at res {res} degenerates to {} voxels",
            grid.num_voxels()
        )));
    }
    Ok(grid)
}

fn fill(d: [u32; 3], keep: impl Fn([u32; 3]) -> bool) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for x in 0..d[0] {
        for y in 0..d[1] {
            for z in 0..d[2] {
                if keep([x, y, z]) {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

/// Smoothstep-interpolated lattice noise on the unit cube, values in [0, 1].
struct ValueNoise {
    n: usize,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(seed: u64, cells: usize) -> Self {
        let n = cells + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n * n * n).map(|_| rng.random::<f64>()).collect();
        Self { n, values }
    }

    fn sample(&self, p: [f64; 3]) -> f64 {
        let cells = (self.n - 1) as f64;
        let mut i0 = [0usize; 3];
        let mut t = [0.0; 3];
        for a in 0..3 {
            let x = (p[a].clamp(0.0, 1.0) * cells).min(cells - 1e-12);
            i0[a] = x.floor() as usize;
            let f = x - x.floor();
            t[a] = f * f * (3.0 - 2.0 * f);
        }
        let at = |x: usize, y: usize, z: usize| self.values[(x * self.n + y) * self.n + z];
        let mut acc = 0.0;
        for c in 0..8 {
            let o = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
            let w: f64 = (0..3)
                .map(|a| if o[a] == 1 { t[a] } else { 1.0 - t[a] })
                .product();
            acc += w * at(i0[0] + o[0], i0[1] + o[1], i0[2] + o[2]);
        }
        acc
    }
}
