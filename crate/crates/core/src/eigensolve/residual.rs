use serde::{Deserialize, Serialize};

use super::linalg::random_block;
use crate::hexfem::CsrMatrix;

/// Power iterations used for the 2-norm estimates.
pub const NORM_POWER_ITERATIONS: usize = 30;

/// Estimated spectral norms `‖K‖₂` and `‖M‖₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixNorms {
    pub k: f64,
    pub m: f64,
}

impl MatrixNorms {
    pub fn estimate(k: &CsrMatrix, m: &CsrMatrix) -> Self {
        Self {
            k: power_norm(k),
            m: power_norm(m),
        }
    }
}

/// 2-norm of a symmetric matrix by power iteration from a fixed random start.
pub fn power_norm(a: &CsrMatrix) -> f64 {
    let n = a.n();
    if n == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = random_block(n, 1, 0x5eed).as_slice().to_vec();
    let mut est = 0.0;
    let mut w = vec![0.0; n];
    for _ in 0..NORM_POWER_ITERATIONS {
        let norm = norm2(&v);
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        a.mul_vec_into(&v, &mut w);
        est = norm2(&w);
        std::mem::swap(&mut v, &mut w);
    }
    est
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Backward error of an approximate eigenpair,
/// `‖Kv − λMv‖ / ((‖K‖ + |λ|‖M‖) ‖v‖)`.
pub fn residual_error(k: &CsrMatrix, m: &CsrMatrix, norms: MatrixNorms, v: &[f64], lambda: f64) -> f64 {
    let kv = k.mul_vec(v);
    let mv = m.mul_vec(v);
    let r: f64 = kv
        .iter()
        .zip(&mv)
        .map(|(a, b)| (a - lambda * b).powi(2))
        .sum::<f64>()
        .sqrt();
    r / ((norms.k + lambda.abs() * norms.m) * norm2(v))
}

/// Mean absolute eigenvalue over a set of modes; reported alongside the
/// residual metric, never used to steer a solve.
pub fn mean_eigenvalue(lambdas: &[f64]) -> f64 {
    if lambdas.is_empty() {
        return 0.0;
    }
    lambdas.iter().map(|l| l.abs()).sum::<f64>() / lambdas.len() as f64
}
