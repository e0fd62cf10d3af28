use nalgebra::{DMatrix, DVector};

use super::linalg::{sorted_symmetric_eigen, symmetrize, SymOperator};
use crate::error::{Error, Result};

/// Relative cutoff on the eigenvalues of the scaled Gram matrix below which
/// directions are treated as linearly dependent.
pub const SVQB_DROP_TOL: f64 = 1e-12;

/// A block of vectors spanning a trial subspace.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub vectors: DMatrix<f64>,
    pub m_orthonormal: bool,
}

impl SubspaceBasis {
    pub fn raw(vectors: DMatrix<f64>) -> Self {
        Self {
            vectors,
            m_orthonormal: false,
        }
    }

    pub fn ncols(&self) -> usize {
        self.vectors.ncols()
    }
}

/// One SVQB pass: M-orthonormalizes the columns of `s` through the
/// eigen-decomposition of the diagonally scaled Gram matrix, dropping
/// directions whose Gram eigenvalue falls below [`SVQB_DROP_TOL`] times the
/// largest.
pub fn svqb_pass<Op: SymOperator + ?Sized>(s: &DMatrix<f64>, m: &Op) -> Result<DMatrix<f64>> {
    let ms = m.apply(s);
    let gram = symmetrize(&(s.transpose() * ms));
    let diag: Vec<f64> = gram.diagonal().iter().copied().collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    if !(dmax > 0.0) || !dmax.is_finite() {
        return Err(Error::Numerical("SVQB input has no nonzero columns".into()));
    }
    // Zero columns get unit scaling so they show up as null directions.
    let scale = DVector::from_iterator(
        diag.len(),
        diag.iter()
            .map(|&d| if d > dmax * 1e-300 { 1.0 / d.sqrt() } else { 1.0 }),
    );
    let scaled = DMatrix::from_fn(gram.nrows(), gram.ncols(), |i, j| {
        gram[(i, j)] * scale[i] * scale[j]
    });
    let (theta, z) = sorted_symmetric_eigen(scaled);
    let tmax = theta.last().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..theta.len())
        .filter(|&i| theta[i] > SVQB_DROP_TOL * tmax)
        .collect();
    if keep.is_empty() {
        return Err(Error::Numerical("SVQB input is numerically rank zero".into()));
    }
    let mut coeff = DMatrix::zeros(s.ncols(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let inv = 1.0 / theta[i].sqrt();
        for r in 0..s.ncols() {
            coeff[(r, c)] = scale[r] * z[(r, i)] * inv;
        }
    }
    Ok(s * coeff)
}

/// Two SVQB passes; the second removes the orthogonality loss of the first
/// for ill-conditioned inputs.
pub fn svqb<Op: SymOperator + ?Sized>(s: &SubspaceBasis, m: &Op) -> Result<SubspaceBasis> {
    if s.vectors.iter().all(|&v| v == 0.0) {
        return Err(Error::Numerical("SVQB input is all zero".into()));
    }
    let once = svqb_pass(&s.vectors, m)?;
    let twice = svqb_pass(&once, m)?;
    Ok(SubspaceBasis {
        vectors: twice,
        m_orthonormal: true,
    })
}

/// Removes from `w` its M-projection onto the M-orthonormal block `x`
/// (applied twice).
pub(crate) fn m_project_out<Op: SymOperator + ?Sized>(
    w: &mut DMatrix<f64>,
    x: &DMatrix<f64>,
    m: &Op,
) {
    if x.ncols() == 0 || w.ncols() == 0 {
        return;
    }
    let mx = m.apply(x);
    for _ in 0..2 {
        let c = mx.transpose() * &*w;
        *w -= x * c;
    }
}
