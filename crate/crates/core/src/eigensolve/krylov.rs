use log::warn;
use nalgebra::DMatrix;

use super::linalg::{random_block, SymOperator};
use super::residual::MatrixNorms;
use super::skyline::SkylineCholesky;
use super::svqb::{svqb, SubspaceBasis};
use crate::error::{Error, Result};
use crate::hexfem::CsrMatrix;

/// Start vectors and power depth of a Krylov warm start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KrylovConfig {
    /// Number of start vectors `k`.
    pub modes: usize,
    /// Number of powers `J`.
    pub depth: usize,
    pub seed: u64,
}

/// Default rigid-mode shift `σ = 1e-4 ‖K‖₂ / ‖M‖₂`.
pub fn rigid_shift(norms: MatrixNorms) -> f64 {
    1e-4 * norms.k / norms.m
}

const SHIFT_RETRIES: usize = 3;

/// Basis `{(K_σ⁻¹ M)ʲ xᵢ}` for `j = 1..J`, `i = 1..k`, with `K_σ = K + σM`
/// and σ from [`rigid_shift`]. The shift makes a free body's stiffness
/// factorizable.
pub fn krylov_warmstart(k: &CsrMatrix, m: &CsrMatrix, cfg: KrylovConfig) -> Result<SubspaceBasis> {
    let sigma = rigid_shift(MatrixNorms::estimate(k, m));
    krylov_warmstart_with_shift(k, m, cfg, sigma)
}

/// As [`krylov_warmstart`] with an explicit starting shift. A failed factor
/// is retried with the shift raised a hundredfold, up to three times.
pub fn krylov_warmstart_with_shift(
    k: &CsrMatrix,
    m: &CsrMatrix,
    cfg: KrylovConfig,
    sigma: f64,
) -> Result<SubspaceBasis> {
    let n = k.n();
    if cfg.modes == 0 || cfg.depth == 0 {
        return Err(Error::InvalidInput("Krylov warm start needs k ≥ 1 and J ≥ 1".into()));
    }
    if cfg.modes * cfg.depth > n {
        return Err(Error::InvalidInput(format!(
            "Krylov basis of {}×{} vectors exceeds {n} degrees of freedom",
            cfg.modes, cfg.depth
        )));
    }
    let factor = shifted_factor(k, m, sigma)?;
    let x = random_block(n, cfg.modes, cfg.seed);
    Ok(krylov_from(&factor, m, &x, cfg.depth)?)
}

fn shifted_factor(k: &CsrMatrix, m: &CsrMatrix, sigma: f64) -> Result<SkylineCholesky> {
    let mut s = sigma;
    let mut last = None;
    for attempt in 0..=SHIFT_RETRIES {
        match SkylineCholesky::factor(&k.add_scaled(s, m)?) {
            Ok(f) => return Ok(f),
            Err(e @ Error::Numerical(_)) => {
                if attempt < SHIFT_RETRIES {
                    warn!("shifted stiffness factor failed at σ = {s:.3e}, retrying");
                }
                last = Some(e);
                s = if s > 0.0 { s * 100.0 } else { diagonal_scale(k, m) };
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Numerical(format!(
        "shifted stiffness is singular up to σ = {:.3e}: {}",
        s / 100.0,
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// `1e-4 · max diag K / max diag M`, a norm-free stand-in for the default shift.
fn diagonal_scale(k: &CsrMatrix, m: &CsrMatrix) -> f64 {
    let max = |a: &CsrMatrix| a.diagonal().into_iter().fold(0.0, f64::max);
    1e-4 * max(k) / max(m)
}

fn krylov_from(
    factor: &SkylineCholesky,
    m: &CsrMatrix,
    x: &DMatrix<f64>,
    depth: usize,
) -> Result<SubspaceBasis> {
    let (n, k) = (x.nrows(), x.ncols());
    let mut basis = DMatrix::zeros(n, k * depth);
    let mut y = x.clone();
    for j in 0..depth {
        y = factor.solve_block(&m.apply(&y));
        for mut c in y.column_iter_mut() {
            let s = c.amax();
            if s > 0.0 {
                c /= s;
            }
        }
        basis.columns_mut(j * k, k).copy_from(&y);
    }
    svqb(&SubspaceBasis::raw(basis), m)
}
