use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Built-in material table. These are conventional handbook-style values for
/// modal sound work, not measured data.
const DEFAULT_TABLE: &str = include_str!("../../materials.json");

/// Isotropic linear-elastic material with Rayleigh damping `C = αM + βK`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// Young's modulus, Pa.
    #[serde(rename = "E")]
    pub youngs_modulus: f64,
    /// Poisson ratio.
    #[serde(rename = "nu")]
    pub poisson_ratio: f64,
    /// Density, kg/m³.
    #[serde(rename = "rho")]
    pub density: f64,
    /// Rayleigh mass coefficient, 1/s.
    pub alpha: f64,
    /// Rayleigh stiffness coefficient, s.
    pub beta: f64,
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidMaterial(format!("{}: {what}", self.name)));
        if !(self.youngs_modulus > 0.0 && self.youngs_modulus.is_finite()) {
            return bad("E must be positive");
        }
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            return bad("nu must lie in (0, 0.5)");
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad("rho must be positive");
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return bad("Rayleigh coefficients must be non-negative");
        }
        Ok(())
    }

    /// Lamé parameters `(λ, μ)`.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        (lambda, mu)
    }

    pub fn table() -> Vec<Material> {
        serde_json::from_str(DEFAULT_TABLE).expect("built-in material table is valid JSON")
    }

    pub fn by_name(name: &str) -> Result<Material> {
        Self::table()
            .into_iter()
            .find(|m| m.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| {
                let names: Vec<String> = Self::table().into_iter().map(|m| m.name).collect();
                Error::InvalidMaterial(format!(
                    "unknown material `{name}`; built-in: {}",
                    names.join(", ")
                ))
            })
    }

    /// Reads a single `{name, E, nu, rho, alpha, beta}` object.
    pub fn from_file(path: &Path) -> Result<Material> {
        let m: Material = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        m.validate()?;
        Ok(m)
    }

    /// A built-in name, or a path to a material JSON file.
    pub fn resolve(spec: &str) -> Result<Material> {
        let path = Path::new(spec);
        if path.extension().is_some_and(|e| e == "json") || path.exists() {
            Self::from_file(path)
        } else {
            Self::by_name(spec)
        }
    }
}
