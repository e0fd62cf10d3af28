//! Assembled matrix-vector products as 3×3×3 sparse convolutions.
//!
//! A vertex field `x` is lifted to per-voxel 24-vectors `x'` (each voxel
//! carries copies of its eight corners). For a fixed element matrix `A_e`,
//! `(Ax)'_u = Σ_i W_i x'_{u+i}` over the 27 neighbor offsets, where row block
//! `j` of `W_i` is row block `j'` of `A_e` when corner `j` of voxel `u` is
//! corner `j'` of voxel `u + i`, and zero otherwise.
//!
//! Row block `j` of `(Ax)'_u` collects every element touching that corner,
//! so it is the full assembled row of the shared vertex. All copies of a
//! vertex agree and averaging them back gives `Ax` with no rescaling.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hexfem::{assemble, ElementMatrices, Mat24};
use crate::voxgrid::{VoxelGrid, CORNER_OFFSETS};

/// Which element matrix a kernel is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Stiffness,
    Mass,
}

/// The 27 offsets in order, x fastest.
pub fn offsets() -> [[i32; 3]; 27] {
    let mut out = [[0; 3]; 27];
    for (n, o) in out.iter_mut().enumerate() {
        *o = [n as i32 % 3 - 1, (n as i32 / 3) % 3 - 1, n as i32 / 9 - 1];
    }
    out
}

fn offset_slot(i: [i32; 3]) -> Option<usize> {
    if i.iter().any(|c| !(-1..=1).contains(c)) {
        return None;
    }
    Some(((i[0] + 1) + 3 * (i[1] + 1) + 9 * (i[2] + 1)) as usize)
}

/// Corner of the voxel at offset `i` that coincides with corner `j` of the
/// center voxel.
fn shared_corner(j: usize, i: [i32; 3]) -> Option<usize> {
    let mut jp = 0;
    for a in 0..3 {
        let c = CORNER_OFFSETS[j][a] as i32 - i[a];
        if !(0..=1).contains(&c) {
            return None;
        }
        jp |= (c as usize) << a;
    }
    Some(jp)
}

/// Convolution weights `W_i`, one 24×24 matrix per neighbor offset.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    weights: Vec<Mat24>,
    /// Nonzero row blocks per offset as `(j, j')` pairs.
    bands: Vec<Vec<(usize, usize)>>,
}

impl ConvKernel {
    pub fn weight(&self, offset: [i32; 3]) -> Option<&Mat24> {
        offset_slot(offset).map(|s| &self.weights[s])
    }

    /// Corners `j` of the center voxel whose rows of `W_i` are nonzero.
    pub fn shared_rows(&self, offset: [i32; 3]) -> Vec<usize> {
        offset_slot(offset)
            .map(|s| self.bands[s].iter().map(|&(j, _)| j).collect())
            .unwrap_or_default()
    }
}

pub fn kernel_from_element(em: &ElementMatrices, which: KernelKind) -> ConvKernel {
    let ae = match which {
        KernelKind::Stiffness => &em.ke,
        KernelKind::Mass => &em.me,
    };
    let mut weights = Vec::with_capacity(27);
    let mut bands = Vec::with_capacity(27);
    for i in offsets() {
        let mut w = Mat24::zeros();
        let mut band = Vec::new();
        for j in 0..8 {
            if let Some(jp) = shared_corner(j, i) {
                w.fixed_rows_mut::<3>(3 * j).copy_from(&ae.fixed_rows::<3>(3 * jp));
                band.push((j, jp));
            }
        }
        weights.push(w);
        bands.push(band);
    }
    ConvKernel { weights, bands }
}

/// `out_u = Σ_i W_i y_{u+i}` over occupied neighbors.
pub fn sparse_conv_apply(g: &VoxelGrid, ker: &ConvKernel, y: &[f64]) -> Result<Vec<f64>> {
    let nv = g.num_voxels();
    if y.len() != 24 * nv {
        return Err(Error::DimensionMismatch { expected: 24 * nv, actual: y.len() });
    }
    let offs = offsets();
    let mut out = vec![0.0; 24 * nv];
    out.par_chunks_mut(24).zip(g.voxels().par_iter()).for_each(|(dst, &u)| {
        for (s, &i) in offs.iter().enumerate() {
            let Some(nb) = g.neighbor(u, i) else { continue };
            let src = &y[24 * nb..24 * nb + 24];
            let w = &ker.weights[s];
            for &(j, _) in &ker.bands[s] {
                for r in 3 * j..3 * j + 3 {
                    dst[r] += (0..24).map(|k| w[(r, k)] * src[k]).sum::<f64>();
                }
            }
        }
    });
    Ok(out)
}

/// `A·x` through the convolution path: lift, convolve, average back.
pub fn conv_matvec(g: &VoxelGrid, ker: &ConvKernel, x: &[f64]) -> Result<Vec<f64>> {
    let lifted = g.vertex_to_voxel(x)?;
    g.voxel_to_vertex(&sparse_conv_apply(g, ker, &lifted)?)
}

/// `‖conv path − A·x‖₂ / ‖A·x‖₂`, with `A` assembled from `em`. Returns the
/// absolute difference when `A·x` is exactly zero.
pub fn equivalence_error(g: &VoxelGrid, em: &ElementMatrices, which: KernelKind, x: &[f64]) -> Result<f64> {
    let (k, m) = assemble(g, em)?;
    let a = match which {
        KernelKind::Stiffness => k,
        KernelKind::Mass => m,
    };
    let conv = DVector::from_vec(conv_matvec(g, &kernel_from_element(em, which), x)?);
    let direct = DVector::from_vec(a.mul_vec(x));
    let diff = (&conv - &direct).norm();
    let scale = direct.norm();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}
