use super::Material;
use crate::eigensolve::ModeSet;
use crate::error::{Error, Result};

/// Transfers eigendata solved for `(from, h)` to `(to, h')` without
/// re-solving.
///
/// `K` scales with `E·h` and `M` with `ρ·h³`, so
/// `λ' = λ · (E'/E) · (ρ/ρ') · (h/h')²` when the Poisson ratios agree.
/// Vectors are multiplied by `√(ρh³ / ρ'h'³)` so they stay M'-orthonormal;
/// their shapes are unchanged. Damping is recomputed from `(α', β')`.
pub fn rescale_eigendata(modes: &ModeSet, from: (&Material, f64), to: (&Material, f64)) -> Result<ModeSet> {
    let ((m0, h0), (m1, h1)) = (from, to);
    m0.validate()?;
    m1.validate()?;
    if !(h0 > 0.0 && h1 > 0.0) {
        return Err(Error::InvalidInput(format!("voxel sizes must be positive, got {h0} and {h1}")));
    }
    if m0.poisson_ratio != m1.poisson_ratio {
        return Err(Error::InvalidMaterial(format!(
            "rescaling needs equal Poisson ratios ({} vs {})",
            m0.poisson_ratio, m1.poisson_ratio
        )));
    }
    let lambda_scale = (m1.youngs_modulus / m0.youngs_modulus) * (m0.density / m1.density) * (h0 / h1).powi(2);
    let vector_scale = ((m0.density * h0.powi(3)) / (m1.density * h1.powi(3))).sqrt();
    let lambdas = modes.lambdas.iter().map(|l| l * lambda_scale).collect();
    Ok(ModeSet::new(
        lambdas,
        &modes.vectors * vector_scale,
        modes.residuals.clone(),
        m1.alpha,
        m1.beta,
    ))
}
