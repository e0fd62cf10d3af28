//! Hexahedral finite elements for isotropic linear elasticity.
//!
//! Every voxel is one trilinear 8-node element. The global stiffness `K` and
//! consistent mass `M` are scattered in the canonical voxel order, so the
//! sparse structures are reproducible bit for bit.

mod csr;
mod element;
mod material;
mod rescale;

use std::sync::{Arc, OnceLock};

pub use csr::{read_spmat, write_spmat, CsrMatrix, SpmatHeader};
pub use element::{element_matrices, ElementMatrices, Mat24};
pub use material::Material;
pub use rescale::rescale_eigendata;

use nalgebra::DMatrix;

use crate::eigensolve::MatrixNorms;
use crate::error::{Error, Result};
use crate::voxgrid::VoxelGrid;

/// Global stiffness and mass of a voxel body.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    pub material: Material,
    pub h: f64,
    pub grid: Arc<VoxelGrid>,
    pub element: ElementMatrices,
    norms: OnceLock<MatrixNorms>,
}

impl AssembledSystem {
    pub fn build(grid: Arc<VoxelGrid>, material: &Material) -> Result<Self> {
        let h = grid.h();
        let element = element_matrices(material, h)?;
        let (k, m) = assemble(&grid, &element)?;
        Ok(Self {
            k,
            m,
            material: material.clone(),
            h,
            grid,
            element,
            norms: OnceLock::new(),
        })
    }

    pub fn ndof(&self) -> usize {
        self.k.n()
    }

    /// Power-iteration estimates of `‖K‖₂` and `‖M‖₂`, computed once.
    pub fn norms(&self) -> MatrixNorms {
        *self
            .norms
            .get_or_init(|| MatrixNorms::estimate(&self.k, &self.m))
    }
}

/// The six rigid motions of the grid's vertices as columns: unit
/// translations along x, y, z, then infinitesimal rotations about the
/// x, y, z axes through the bounding-box center. They span the null space
/// of `K` for a connected body.
pub fn rigid_body_modes(grid: &VoxelGrid) -> DMatrix<f64> {
    let nv = grid.num_vertices();
    let (c, _) = grid.center_and_extent();
    let mut r = DMatrix::zeros(3 * nv, 6);
    for v in 0..nv {
        let p = grid.vertex_position(v);
        let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
        for a in 0..3 {
            r[(3 * v + a, a)] = 1.0;
        }
        // ω × d for ω = e_x, e_y, e_z
        r[(3 * v + 1, 3)] = -d[2];
        r[(3 * v + 2, 3)] = d[1];
        r[(3 * v, 4)] = d[2];
        r[(3 * v + 2, 4)] = -d[0];
        r[(3 * v, 5)] = -d[1];
        r[(3 * v + 1, 5)] = d[0];
    }
    r
}

/// Scatter-adds the element matrices over every voxel.
///
/// Returns `(K, M)` on a shared pattern: row `3v + a` holds the three
/// components of every vertex that shares a voxel with vertex `v`.
pub fn assemble(grid: &VoxelGrid, em: &ElementMatrices) -> Result<(CsrMatrix, CsrMatrix)> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("cannot assemble an empty grid".into()));
    }
    let nv = grid.num_vertices();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for c in grid.voxel_corners() {
        for &a in c {
            adj[a].extend_from_slice(c);
        }
    }
    let mut row_ptr = Vec::with_capacity(3 * nv + 1);
    let mut col_idx = Vec::new();
    row_ptr.push(0);
    for neighbors in &mut adj {
        neighbors.sort_unstable();
        neighbors.dedup();
        for _ in 0..3 {
            for &w in neighbors.iter() {
                col_idx.extend_from_slice(&[3 * w, 3 * w + 1, 3 * w + 2]);
            }
            row_ptr.push(col_idx.len());
        }
    }
    let mut k = CsrMatrix::from_pattern(row_ptr.clone(), col_idx.clone());
    let mut m = CsrMatrix::from_pattern(row_ptr, col_idx);

    for corners in grid.voxel_corners() {
        for i in 0..24 {
            let r = 3 * corners[i / 3] + i % 3;
            for j in 0..24 {
                let c = 3 * corners[j / 3] + j % 3;
                k.add_at(r, c, em.ke[(i, j)]);
                m.add_at(r, c, em.me[(i, j)]);
            }
        }
    }
    Ok((k, m))
}
