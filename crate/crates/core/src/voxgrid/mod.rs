//! Hexahedral occupancy grids.
//!
//! A [`VoxelGrid`] stores its occupied voxels sparsely as integer coordinates
//! sorted lexicographically on `(x, y, z)`. Every corner of an occupied voxel is
//! a vertex; vertices get contiguous ids in the same lexicographic order of
//! their lattice coordinates.
//!
//! Corner order inside a voxel is `zyx`: corner `c` sits at offset
//! `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`, so z is the slowest-varying bit.
//! Every per-voxel 24-vector in this crate stores corner `c`'s `(x, y, z)`
//! components at positions `3c..3c + 3`.

mod file;
mod mesh;
mod voxelize;

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};

pub use file::{read_vgrid, write_vgrid, VgridHeader};
pub use mesh::TriMesh;
pub use voxelize::voxelize;

/// Offsets of the eight voxel corners in `zyx` order.
pub const CORNER_OFFSETS: [[u32; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// Face order of [`SurfaceExposure`]: −x, +x, −y, +y, −z, +z.
pub const FACE_NORMALS: [[i32; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

/// Corners (in `zyx` numbering) lying on each face.
pub const FACE_CORNERS: [[usize; 4]; 6] = [
    [0, 4, 6, 2],
    [1, 3, 7, 5],
    [0, 1, 5, 4],
    [2, 6, 7, 3],
    [0, 2, 3, 1],
    [4, 5, 7, 6],
];

pub type Coord = [u32; 3];

#[derive(Debug, Clone)]
pub struct VoxelGrid {
    dims: [u32; 3],
    h: f64,
    origin: [f64; 3],
    voxels: Vec<Coord>,
    voxel_lookup: HashMap<Coord, usize>,
    vertices: Vec<Coord>,
    vertex_lookup: HashMap<Coord, usize>,
    corners: Vec<[usize; 8]>,
}

impl PartialEq for VoxelGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.h == other.h
            && self.origin == other.origin
            && self.voxels == other.voxels
    }
}

impl VoxelGrid {
    /// Builds a grid from occupied coordinates. Duplicates are merged and the
    /// list is sorted into canonical order.
    pub fn new(dims: [u32; 3], h: f64, origin: [f64; 3], mut voxels: Vec<Coord>) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!("voxel size must be positive, got {h}")));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidInput(format!("grid dims must be positive, got {dims:?}")));
        }
        if let Some(bad) = voxels
            .iter()
            .find(|u| u[0] >= dims[0] || u[1] >= dims[1] || u[2] >= dims[2])
        {
            return Err(Error::InvalidInput(format!(
                "voxel {bad:?} lies outside dims {dims:?}"
            )));
        }
        voxels.sort_unstable();
        voxels.dedup();

        let voxel_lookup: HashMap<Coord, usize> =
            voxels.iter().enumerate().map(|(i, &u)| (u, i)).collect();

        let mut vertices: Vec<Coord> = voxels
            .iter()
            .flat_map(|u| CORNER_OFFSETS.iter().map(move |o| [u[0] + o[0], u[1] + o[1], u[2] + o[2]]))
            .collect();
        vertices.sort_unstable();
        vertices.dedup();
        let vertex_lookup: HashMap<Coord, usize> =
            vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();

        let corners = voxels
            .iter()
            .map(|u| {
                let mut c = [0usize; 8];
                for (slot, o) in c.iter_mut().zip(CORNER_OFFSETS.iter()) {
                    *slot = vertex_lookup[&[u[0] + o[0], u[1] + o[1], u[2] + o[2]]];
                }
                c
            })
            .collect();

        Ok(Self {
            dims,
            h,
            origin,
            voxels,
            voxel_lookup,
            vertices,
            vertex_lookup,
            corners,
        })
    }

    /// A fully occupied box of `nx × ny × nz` voxels at the origin.
    pub fn solid_box(n: [u32; 3], h: f64) -> Result<Self> {
        let mut voxels = Vec::with_capacity((n[0] * n[1] * n[2]) as usize);
        for x in 0..n[0] {
            for y in 0..n[1] {
                for z in 0..n[2] {
                    voxels.push([x, y, z]);
                }
            }
        }
        Self::new(n, h, [0.0; 3], voxels)
    }

    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    /// Voxel edge length in meters.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// World position of lattice point `(0, 0, 0)`.
    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn voxels(&self) -> &[Coord] {
        &self.voxels
    }

    pub fn num_voxels(&self) -> usize {
        self.voxels.len()
    }

    pub fn vertices(&self) -> &[Coord] {
        &self.vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Degrees of freedom of a displacement field (3 per vertex).
    pub fn ndof(&self) -> usize {
        3 * self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn voxel_index(&self, u: Coord) -> Option<usize> {
        self.voxel_lookup.get(&u).copied()
    }

    /// Index of the voxel at `u + offset`, if occupied.
    pub fn neighbor(&self, u: Coord, offset: [i32; 3]) -> Option<usize> {
        let mut n = [0u32; 3];
        for a in 0..3 {
            let v = u[a] as i64 + offset[a] as i64;
            if v < 0 || v >= self.dims[a] as i64 {
                return None;
            }
            n[a] = v as u32;
        }
        self.voxel_index(n)
    }

    pub fn vertex_index(&self, p: Coord) -> Option<usize> {
        self.vertex_lookup.get(&p).copied()
    }

    /// Vertex ids of each voxel's corners, in `zyx` corner order.
    pub fn voxel_corners(&self) -> &[[usize; 8]] {
        &self.corners
    }

    pub fn vertex_position(&self, id: usize) -> [f64; 3] {
        let p = self.vertices[id];
        [
            self.origin[0] + p[0] as f64 * self.h,
            self.origin[1] + p[1] as f64 * self.h,
            self.origin[2] + p[2] as f64 * self.h,
        ]
    }

    pub fn voxel_center(&self, idx: usize) -> [f64; 3] {
        let u = self.voxels[idx];
        [
            self.origin[0] + (u[0] as f64 + 0.5) * self.h,
            self.origin[1] + (u[1] as f64 + 0.5) * self.h,
            self.origin[2] + (u[2] as f64 + 0.5) * self.h,
        ]
    }

    /// Axis-aligned bounds of the occupied voxels, world coordinates.
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [u32::MAX; 3];
        let mut hi = [0u32; 3];
        for u in &self.voxels {
            for a in 0..3 {
                lo[a] = lo[a].min(u[a]);
                hi[a] = hi[a].max(u[a] + 1);
            }
        }
        let f = |v: [u32; 3]| {
            [
                self.origin[0] + v[0] as f64 * self.h,
                self.origin[1] + v[1] as f64 * self.h,
                self.origin[2] + v[2] as f64 * self.h,
            ]
        };
        (f(lo), f(hi))
    }

    /// Bounding-box center and longest side.
    pub fn center_and_extent(&self) -> ([f64; 3], f64) {
        let (lo, hi) = self.bounding_box();
        let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, (lo[2] + hi[2]) / 2.0];
        let a = (0..3).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
        (center, a)
    }

    /// Number of occupied voxels sharing each vertex.
    pub fn vertex_valence(&self) -> Vec<u32> {
        let mut count = vec![0u32; self.vertices.len()];
        for c in &self.corners {
            for &v in c {
                count[v] += 1;
            }
        }
        count
    }

    /// Same occupancy with a different voxel size (geometry scaled about the
    /// origin).
    pub fn with_voxel_size(&self, h: f64) -> Result<Self> {
        let s = h / self.h;
        Self::new(
            self.dims,
            h,
            [self.origin[0] * s, self.origin[1] * s, self.origin[2] * s],
            self.voxels.clone(),
        )
    }

    /// Partition of the occupied voxels under face (6-)connectivity, largest
    /// component first; ties keep the order of their smallest voxel.
    pub fn connected_components(&self) -> Vec<VoxelGrid> {
        let n = self.voxels.len();
        let mut label = vec![usize::MAX; n];
        let mut groups: Vec<Vec<Coord>> = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = groups.len();
            let mut members = Vec::new();
            let mut queue = VecDeque::from([start]);
            label[start] = id;
            while let Some(i) = queue.pop_front() {
                let u = self.voxels[i];
                members.push(u);
                for off in FACE_NORMALS {
                    if let Some(j) = self.neighbor(u, off) {
                        if label[j] == usize::MAX {
                            label[j] = id;
                            queue.push_back(j);
                        }
                    }
                }
            }
            groups.push(members);
        }
        groups.sort_by_key(|g| std::cmp::Reverse(g.len()));
        groups
            .into_iter()
            .map(|g| {
                VoxelGrid::new(self.dims, self.h, self.origin, g)
                    .expect("subset of a valid grid is valid")
            })
            .collect()
    }

    /// Concatenates each voxel's eight corner features into a 24-vector.
    pub fn vertex_to_voxel(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(x, self.ndof())?;
        let mut y = vec![0.0; 24 * self.voxels.len()];
        for (dst, c) in y.chunks_exact_mut(24).zip(&self.corners) {
            for (k, &v) in c.iter().enumerate() {
                dst[3 * k..3 * k + 3].copy_from_slice(&x[3 * v..3 * v + 3]);
            }
        }
        Ok(y)
    }

    /// Averages, per vertex, its three slots over all adjacent voxels.
    ///
    /// Uses a running mean, so identical copies reproduce their value exactly.
    pub fn voxel_to_vertex(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(y, 24 * self.voxels.len())?;
        let mut x = vec![0.0; self.ndof()];
        let mut seen = vec![0u32; self.vertices.len()];
        for (src, c) in y.chunks_exact(24).zip(&self.corners) {
            for (k, &v) in c.iter().enumerate() {
                seen[v] += 1;
                let n = seen[v] as f64;
                for a in 0..3 {
                    let m = &mut x[3 * v + a];
                    *m += (src[3 * k + a] - *m) / n;
                }
            }
        }
        Ok(x)
    }

    /// Sums per-voxel 24-vectors into their vertices (the assembly scatter).
    pub fn scatter_add(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(y, 24 * self.voxels.len())?;
        let mut x = vec![0.0; self.ndof()];
        for (src, c) in y.chunks_exact(24).zip(&self.corners) {
            for (k, &v) in c.iter().enumerate() {
                for a in 0..3 {
                    x[3 * v + a] += src[3 * k + a];
                }
            }
        }
        Ok(x)
    }

    pub fn surface_exposure(&self) -> SurfaceExposure {
        let faces = self
            .voxels
            .iter()
            .map(|&u| {
                let mut f = [false; 6];
                for (slot, off) in f.iter_mut().zip(FACE_NORMALS) {
                    *slot = self.neighbor(u, off).is_none();
                }
                f
            })
            .collect();
        SurfaceExposure { faces }
    }
}

fn check_len(v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: v.len(),
        });
    }
    Ok(())
}

/// Per-voxel flags telling which faces border empty space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceExposure {
    /// Indexed like [`VoxelGrid::voxels`]; face order −x, +x, −y, +y, −z, +z.
    pub faces: Vec<[bool; 6]>,
}

impl SurfaceExposure {
    pub fn exposed_count(&self) -> usize {
        self.faces.iter().flatten().filter(|&&f| f).count()
    }

    /// The 6-element binary feature vector of one voxel.
    pub fn as_binary(&self, voxel: usize) -> [f64; 6] {
        self.faces[voxel].map(|f| if f { 1.0 } else { 0.0 })
    }
}
