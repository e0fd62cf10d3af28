//! Far-field acoustic transfer maps.
//!
//! A map stores `ψ(θ, φ)` on a 64×32 lattice so that `|p(x)| ≈ ψ / r` with
//! `r` the distance from the object center. Pixels are sampled at their
//! centers: `θ_j = (j + ½)·2π/64`, `φ_i = (i + ½)·π/32`, stored row-major
//! with φ rows and θ columns. The grid is kept with unit Frobenius norm and
//! the magnitude lives in `log_norm` (natural log).

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_container, write_container};
use crate::radiation::{evaluate_potential, BemSurface, HelmholtzContext};

pub use crate::eigensolve::mel_normalized as mel_normalize_frequency;

pub const THETA_RES: usize = 64;
pub const PHI_RES: usize = 32;
pub const PIXELS: usize = THETA_RES * PHI_RES;
pub const SAMPLE_SPHERES: usize = 3;
pub const PIXEL_CONVENTION: &str = "center;theta=(j+0.5)*2pi/64;phi=(i+0.5)*pi/32;row-major phi-then-theta";

/// Placement of the fitting spheres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FfatRange {
    /// Radii `(3)^i · a`.
    Far,
    /// Radii `(1.25)^i · a`, for listeners close to the object.
    Near,
}

impl FfatRange {
    pub fn ratio(self) -> f64 {
        match self {
            FfatRange::Far => 3.0,
            FfatRange::Near => 1.25,
        }
    }
}

impl std::str::FromStr for FfatRange {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "far" => Ok(FfatRange::Far),
            "near" => Ok(FfatRange::Near),
            _ => Err(Error::InvalidInput(format!("FFAT range must be far or near, got {s:?}"))),
        }
    }
}

pub fn theta(j: usize) -> f64 {
    (j as f64 + 0.5) * 2.0 * PI / THETA_RES as f64
}

pub fn phi(i: usize) -> f64 {
    (i as f64 + 0.5) * PI / PHI_RES as f64
}

fn direction(theta: f64, phi: f64) -> [f64; 3] {
    [phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePattern {
    pub center: [f64; 3],
    pub a: f64,
    pub radii: Vec<f64>,
    /// Pixel-center unit directions, row-major φ-then-θ.
    pub directions: Vec<[f64; 3]>,
}

impl SamplePattern {
    /// Sample points ordered by radius, then pixel.
    pub fn points(&self) -> Vec<[f64; 3]> {
        self.radii
            .iter()
            .flat_map(|&r| {
                self.directions
                    .iter()
                    .map(move |d| [0, 1, 2].map(|k| self.center[k] + r * d[k]))
            })
            .collect()
    }
}

/// Radii `c^i · a` for `i = 1..3`, `c` from the range.
pub fn sample_pattern(center: [f64; 3], a: f64, range: FfatRange) -> Result<SamplePattern> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidInput(format!("object size must be positive, got {a}")));
    }
    let c = range.ratio();
    let radii = (1..=SAMPLE_SPHERES as i32).map(|i| c.powi(i) * a).collect();
    let directions = (0..PHI_RES)
        .flat_map(|i| (0..THETA_RES).map(move |j| direction(theta(j), phi(i))))
        .collect();
    Ok(SamplePattern { center, a, radii, directions })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfatMap {
    /// Normalized ψ, unit Frobenius norm, row-major φ-then-θ.
    pub grid: Vec<f64>,
    /// Natural log of the Frobenius norm of the unnormalized map.
    pub log_norm: f64,
    pub center: [f64; 3],
    pub a: f64,
    pub radii: Vec<f64>,
}

/// Frobenius norm of a map grid.
pub fn map_norm(grid: &[f64]) -> f64 {
    grid.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl FfatMap {
    /// Splits an unnormalized ψ grid into unit grid and log norm.
    pub fn from_psi(psi: Vec<f64>, center: [f64; 3], a: f64, radii: Vec<f64>) -> Result<Self> {
        if psi.len() != PIXELS {
            return Err(Error::DimensionMismatch { expected: PIXELS, actual: psi.len() });
        }
        let norm = map_norm(&psi);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "transfer map has norm {norm}; the mode radiates no sound or the pressures are not finite"
            )));
        }
        Ok(Self { grid: psi.iter().map(|v| v / norm).collect(), log_norm: norm.ln(), center, a, radii })
    }

    /// The unnormalized ψ grid.
    pub fn psi(&self) -> Vec<f64> {
        let s = self.log_norm.exp();
        self.grid.iter().map(|v| v * s).collect()
    }

    pub fn renormalized(&self) -> Result<Self> {
        let norm = map_norm(&self.grid);
        let mut out = Self::from_psi(self.grid.clone(), self.center, self.a, self.radii.clone())?;
        out.log_norm = self.log_norm + norm.ln();
        Ok(out)
    }
}

/// Per direction, `ψ = argmin Σ_i (ψ/R_i − |p_i|)² = (Σ |p_i|/R_i) / (Σ 1/R_i²)`.
pub fn fit_ffat(pressures: &[Complex64], pattern: &SamplePattern) -> Result<FfatMap> {
    let magnitudes: Vec<f64> = pressures.iter().map(|z| z.norm()).collect();
    fit_magnitudes(&magnitudes, pattern)
}

/// [`fit_ffat`] on pressure magnitudes.
pub fn fit_magnitudes(magnitudes: &[f64], pattern: &SamplePattern) -> Result<FfatMap> {
    let nd = pattern.directions.len();
    let expected = pattern.radii.len() * nd;
    if magnitudes.len() != expected {
        return Err(Error::DimensionMismatch { expected, actual: magnitudes.len() });
    }
    let denom: f64 = pattern.radii.iter().map(|r| 1.0 / (r * r)).sum();
    let psi = (0..nd)
        .map(|d| {
            pattern
                .radii
                .iter()
                .enumerate()
                .map(|(i, r)| magnitudes[i * nd + d] / r)
                .sum::<f64>()
                / denom
        })
        .collect();
    FfatMap::from_psi(psi, pattern.center, pattern.a, pattern.radii.clone())
}

/// Evaluates a solved surface field on the pattern and fits its map.
pub fn fit_from_surface(
    surface: &BemSurface,
    p_surf: &[Complex64],
    dn_p: &[Complex64],
    ctx: &HelmholtzContext,
    pattern: &SamplePattern,
) -> Result<FfatMap> {
    let p = evaluate_potential(surface, p_surf, dn_p, &pattern.points(), ctx)?;
    fit_ffat(&p, pattern)
}

/// Map of the object scaled by `γ`: `Ψ → γ^{−5/2} Ψ`, lengths times `γ`.
/// The center is kept; the grid is untouched.
pub fn scale_ffat(map: &FfatMap, gamma: f64) -> Result<FfatMap> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("scale factor must be positive, got {gamma}")));
    }
    Ok(FfatMap {
        grid: map.grid.clone(),
        log_norm: map.log_norm - 2.5 * gamma.ln(),
        center: map.center,
        a: map.a * gamma,
        radii: map.radii.iter().map(|r| r * gamma).collect(),
    })
}

/// `|p|` estimate at `x`: bilinear ψ (azimuth wraps, polar clamps) over `r`.
pub fn query(map: &FfatMap, x: [f64; 3]) -> Result<f64> {
    let d = [0, 1, 2].map(|k| x[k] - map.center[k]);
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::InvalidInput("listener coincides with the map center".into()));
    }
    let th = d[1].atan2(d[0]).rem_euclid(2.0 * PI);
    let ph = (d[2] / r).clamp(-1.0, 1.0).acos();
    let u = th / (2.0 * PI) * THETA_RES as f64 - 0.5;
    let v = (ph / PI * PHI_RES as f64 - 0.5).clamp(0.0, (PHI_RES - 1) as f64);
    let (uf, vf) = (u.floor(), v.floor());
    let (fu, fv) = (u - uf, v - vf);
    let j0 = (uf as i64).rem_euclid(THETA_RES as i64) as usize;
    let j1 = (j0 + 1) % THETA_RES;
    let i0 = vf as usize;
    let i1 = (i0 + 1).min(PHI_RES - 1);
    let g = |i: usize, j: usize| map.grid[i * THETA_RES + j];
    let psi = (1.0 - fv) * ((1.0 - fu) * g(i0, j0) + fu * g(i0, j1)) + fv * ((1.0 - fu) * g(i1, j0) + fu * g(i1, j1));
    Ok(map.log_norm.exp() * psi / r)
}

/// `.ffat` header; the payload is the normalized grid as f32 LE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfatHeader {
    pub res: [usize; 2],
    pub a: f64,
    pub center: [f64; 3],
    pub radii: Vec<f64>,
    pub log_norm: f64,
    pub pixel_convention: String,
}

pub fn write_ffat<W: Write>(w: W, map: &FfatMap) -> Result<()> {
    let header = FfatHeader {
        res: [THETA_RES, PHI_RES],
        a: map.a,
        center: map.center,
        radii: map.radii.clone(),
        log_norm: map.log_norm,
        pixel_convention: PIXEL_CONVENTION.into(),
    };
    let payload: Vec<u8> = map.grid.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    write_container(w, &header, &payload)
}

/// Reads a map; the f32 grid is renormalized and the norm folded into
/// `log_norm`.
pub fn read_ffat<R: BufRead>(r: R) -> Result<FfatMap> {
    let (h, payload): (FfatHeader, _) = read_container(r)?;
    if h.res != [THETA_RES, PHI_RES] {
        return Err(Error::Format(format!("unsupported map resolution {:?}", h.res)));
    }
    if payload.len() != 4 * PIXELS {
        return Err(Error::Format(format!("map payload holds {} bytes, expected {}", payload.len(), 4 * PIXELS)));
    }
    let grid = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    FfatMap { grid, log_norm: h.log_norm, center: h.center, a: h.a, radii: h.radii }.renormalized()
}

/// Grayscale PNG of the grid, scaled so its maximum is white.
pub fn write_png(map: &FfatMap, path: &Path) -> Result<()> {
    let max = map.grid.iter().cloned().fold(0.0, f64::max);
    let pixels: Vec<u8> = map
        .grid
        .iter()
        .map(|&v| if max > 0.0 { (255.0 * v / max).round() as u8 } else { 0 })
        .collect();
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut enc = png::Encoder::new(file, THETA_RES as u32, PHI_RES as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().map_err(|e| Error::Format(e.to_string()))?;
    w.write_image_data(&pixels).map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}
