use rayon::prelude::*;

use super::{Coord, TriMesh, VoxelGrid};
use crate::error::{Error, Result};

/// Voxelizes a watertight mesh so that its longest bounding-box side spans
/// `target_resolution` voxels.
///
/// A voxel is occupied when its center is inside the mesh. Insideness is the
/// majority vote of three ray-parity tests, one along each positive axis.
pub fn voxelize(mesh: &TriMesh, target_resolution: u32) -> Result<VoxelGrid> {
    if target_resolution < 2 {
        return Err(Error::InvalidInput(format!(
            "target resolution must be at least 2, got {target_resolution}"
        )));
    }
    mesh.check_watertight()?;

    let (lo, hi) = mesh.bounds();
    let extent = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let longest = extent.iter().cloned().fold(0.0, f64::max);
    if !(longest > 0.0) {
        return Err(Error::InvalidInput("mesh has zero extent".into()));
    }
    let h = longest / target_resolution as f64;
    let dims = extent.map(|e| ((e / h - 1e-9).ceil() as u32).max(1));

    let n = (dims[0] * dims[1] * dims[2]) as usize;
    let flat = |u: [u32; 3]| ((u[0] * dims[1] + u[1]) * dims[2] + u[2]) as usize;
    let mut votes = vec![0u8; n];

    for axis in 0..3 {
        let inside = parity_along(mesh, axis, dims, lo, h);
        for (u, hit) in inside {
            if hit {
                votes[flat(u)] += 1;
            }
        }
    }

    let mut voxels: Vec<Coord> = Vec::new();
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            for z in 0..dims[2] {
                if votes[flat([x, y, z])] >= 2 {
                    voxels.push([x, y, z]);
                }
            }
        }
    }
    if voxels.is_empty() {
        return Err(Error::EmptyOccupancy);
    }
    VoxelGrid::new(dims, h, lo, voxels)
}

/// Ray-parity classification of every voxel center, casting rays along
/// `axis`. Returns `(coord, inside)` for all centers.
fn parity_along(
    mesh: &TriMesh,
    axis: usize,
    dims: [u32; 3],
    lo: [f64; 3],
    h: f64,
) -> Vec<(Coord, bool)> {
    let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
    let (nb, nc) = (dims[b] as usize, dims[c] as usize);
    let center = |a: usize, i: usize| lo[a] + (i as f64 + 0.5) * h;

    // Crossing positions along `axis`, binned per (b, c) row.
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); nb * nc];
    for t in &mesh.triangles {
        let p = t.map(|i| mesh.positions[i]);
        let (pb, pc) = (p.map(|v| v[b]), p.map(|v| v[c]));
        let bmin = pb.iter().cloned().fold(f64::INFINITY, f64::min);
        let bmax = pb.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let cmin = pc.iter().cloned().fold(f64::INFINITY, f64::min);
        let cmax = pc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = |min: f64, max: f64, a: usize, n: usize| {
            let first = ((min - lo[a]) / h - 0.5).ceil().max(0.0) as usize;
            let last = ((max - lo[a]) / h - 0.5).floor();
            if last < 0.0 {
                return first..first;
            }
            first..(last as usize + 1).min(n)
        };
        for ib in range(bmin, bmax, b, nb) {
            let qb = center(b, ib);
            for ic in range(cmin, cmax, c, nc) {
                let qc = center(c, ic);
                if let Some(w) = barycentric(pb, pc, qb, qc) {
                    let s = w[0] * p[0][axis] + w[1] * p[1][axis] + w[2] * p[2][axis];
                    rows[ib * nc + ic].push(s);
                }
            }
        }
    }

    let na = dims[axis] as usize;
    rows.par_iter_mut()
        .enumerate()
        .flat_map_iter(|(row, hits)| {
            hits.sort_by(f64::total_cmp);
            let (ib, ic) = (row / nc, row % nc);
            let hits = &*hits;
            (0..na).map(move |ia| {
                let s = center(axis, ia);
                let ahead = hits.len() - hits.partition_point(|&t| t <= s);
                let mut u = [0u32; 3];
                u[axis] = ia as u32;
                u[b] = ib as u32;
                u[c] = ic as u32;
                (u, ahead % 2 == 1)
            })
        })
        .collect()
}

/// Barycentric weights of `(qb, qc)` in the projected triangle, if it is
/// hit. Points on an edge belong to the triangle only when the edge's inward
/// normal is lexicographically positive, so a ray through an edge shared by
/// two triangles projecting to opposite sides is counted once. Edge-on
/// triangles never hit.
fn barycentric(pb: [f64; 3], pc: [f64; 3], qb: f64, qc: f64) -> Option<[f64; 3]> {
    let p = [(pb[0], pc[0]), (pb[1], pc[1]), (pb[2], pc[2])];
    let area = orient(p[0], p[1], p[2]);
    if area == 0.0 {
        return None;
    }
    let mut w = [0.0; 3];
    for k in 0..3 {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        let e = orient(p[i], p[j], (qb, qc)) / area;
        if e < 0.0 {
            return None;
        }
        if e == 0.0 {
            // gradient of w_k points into the triangle
            let g = (-(p[j].1 - p[i].1) / area, (p[j].0 - p[i].0) / area);
            if !(g.0 > 0.0 || (g.0 == 0.0 && g.1 > 0.0)) {
                return None;
            }
        }
        w[k] = e;
    }
    Some(w)
}

/// Orientation of `q` against the directed segment `a -> b`, evaluated with
/// the endpoints in canonical order so the result is exactly antisymmetric.
fn orient(a: (f64, f64), b: (f64, f64), q: (f64, f64)) -> f64 {
    let raw = |a: (f64, f64), b: (f64, f64)| (b.0 - a.0) * (q.1 - a.1) - (q.0 - a.0) * (b.1 - a.1);
    if a.0 < b.0 || (a.0 == b.0 && a.1 <= b.1) {
        raw(a, b)
    } else {
        -raw(b, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_fills_grid() {
        let m = TriMesh::cuboid([0.0; 3], [1.0; 3]);
        let g = voxelize(&m, 4).unwrap();
        assert_eq!(g.dims(), [4, 4, 4]);
        assert_eq!(g.num_voxels(), 64);
        assert_eq!(g.h(), 0.25);

        let g = voxelize(&m, 32).unwrap();
        assert_eq!(g.num_voxels(), 32768);
        assert_eq!(g.num_vertices(), 35937);
    }

    #[test]
    fn sphere_matches_center_in_sphere_oracle() {
        let m = TriMesh::icosphere([0.0; 3], 0.5, 4);
        let g = voxelize(&m, 8).unwrap();
        // Independent oracle: centers of an 8^3 lattice over [-0.5, 0.5]^3.
        let (lo, _) = m.bounds();
        let h = g.h();
        let mut expected = Vec::new();
        for x in 0..8u32 {
            for y in 0..8u32 {
                for z in 0..8u32 {
                    let p = [x, y, z].map(|i| lo[0] + (i as f64 + 0.5) * h);
                    if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < 0.25 {
                        expected.push([x, y, z]);
                    }
                }
            }
        }
        assert_eq!(g.voxels(), expected.as_slice());
    }

    #[test]
    fn translation_by_whole_voxels_is_invariant() {
        let m = TriMesh::icosphere([0.1, -0.2, 0.3], 0.4, 3);
        let g = voxelize(&m, 10).unwrap();
        let shifted = voxelize(&m.translated([3.0 * g.h(), -2.0 * g.h(), g.h()]), 10).unwrap();
        assert_eq!(g.voxels(), shifted.voxels());
        assert_eq!(g.dims(), shifted.dims());
    }

    #[test]
    fn bar_dims_follow_longest_side() {
        let m = TriMesh::cuboid([0.0; 3], [2.0, 0.5, 0.5]);
        let g = voxelize(&m, 8).unwrap();
        assert_eq!(g.dims(), [8, 2, 2]);
        assert_eq!(g.num_voxels(), 32);
    }

    #[test]
    fn errors() {
        let mut open = TriMesh::cuboid([0.0; 3], [1.0; 3]);
        open.triangles.truncate(10);
        assert!(matches!(voxelize(&open, 4), Err(Error::NonWatertight { .. })));
        assert!(voxelize(&TriMesh::cuboid([0.0; 3], [1.0; 3]), 1).is_err());
        // A thin sliver whose volume misses every voxel center.
        let sliver = TriMesh::cuboid([0.0; 3], [1.0, 1.0, 0.01]);
        assert!(matches!(voxelize(&sliver, 2), Err(Error::EmptyOccupancy)));
    }
}
