//! Small dense helpers shared by the solvers.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hexfem::CsrMatrix;

/// A symmetric operator applied to dense blocks.
pub trait SymOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
}

impl SymOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.mul_block(x)
    }
}

impl SymOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }
}

/// Uniform(-1, 1) block from a seeded stream.
pub fn random_block(n: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub(crate) fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigen-decomposition of a symmetric matrix with ascending eigenvalues.
pub(crate) fn sorted_symmetric_eigen(a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = a.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Dense symmetric-definite generalized eigenproblem `K v = λ M v`.
#[derive(Debug, Clone)]
pub struct DenseEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// M-orthonormal columns.
    pub vectors: DMatrix<f64>,
}

pub const DENSE_ORACLE_LIMIT: usize = 600;

/// Full decomposition through a Cholesky reduction to standard form. Used as
/// the ground truth for the iterative solvers.
pub fn dense_oracle(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DenseEigen> {
    let n = k.nrows();
    if n > DENSE_ORACLE_LIMIT {
        return Err(Error::SizeLimit {
            size: n,
            limit: DENSE_ORACLE_LIMIT,
        });
    }
    let l = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?
        .l();
    let linv_k = l
        .solve_lower_triangular(k)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let a = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let (values, z) = sorted_symmetric_eigen(symmetrize(&a));
    let vectors = l
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    Ok(DenseEigen { values, vectors })
}
