//! Exterior Helmholtz boundary elements on the voxel surface.
//!
//! Constant square panels with collocation at their centers. With `n` the
//! outward normal and `q = ∂p/∂n` the Neumann data, the surface pressure
//! solves `(½I + K) p = V(−q)` where
//! `V_ij = ∫_j G(x_i, y) dS` and `K_ij = −∫_j ∂G/∂n_y(x_i, y) dS`, and the
//! field is `p(x) = V(−q) − K p` evaluated off the surface.
//! `G(x, y) = e^{iκr} / 4πr` is the outgoing free-space kernel.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use log::debug;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{f64s_to_le, le_to_f64s, read_container, write_container};
use crate::voxgrid::{SurfaceExposure, VoxelGrid, CORNER_OFFSETS, FACE_CORNERS, FACE_NORMALS};

pub const SOUND_SPEED: f64 = 343.0;
pub const AIR_DENSITY: f64 = 1.204;
/// Largest dense system the solver will build.
pub const MAX_PANELS: usize = 3000;

/// Pivot ratio below which the boundary system is reported singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-8;

/// One constant panel: a face of an exposed voxel, or a sub-square of one.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub center: [f64; 3],
    /// Unit normal pointing out of the body.
    pub normal: [f64; 3],
    pub side: f64,
    /// Vertex ids of the face corners and their bilinear weights at the
    /// panel center.
    pub corners: [usize; 4],
    pub weights: [f64; 4],
}

impl Panel {
    pub fn area(&self) -> f64 {
        self.side * self.side
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BemSurface {
    pub panels: Vec<Panel>,
    /// Voxel edge length.
    pub h: f64,
    /// Each exposed face is split into `subdivision²` panels.
    pub subdivision: usize,
}

impl BemSurface {
    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn panel_side(&self) -> f64 {
        self.h / self.subdivision as f64
    }

    pub fn area(&self) -> f64 {
        self.panels.iter().map(Panel::area).sum()
    }
}

/// One panel per exposed face.
pub fn build_surface(g: &VoxelGrid, exp: &SurfaceExposure) -> Result<BemSurface> {
    build_surface_subdivided(g, exp, 1)
}

/// Exposed faces split into `s × s` panels.
pub fn build_surface_subdivided(g: &VoxelGrid, exp: &SurfaceExposure, s: usize) -> Result<BemSurface> {
    if s == 0 {
        return Err(Error::InvalidInput("panel subdivision must be at least 1".into()));
    }
    if exp.faces.len() != g.num_voxels() {
        return Err(Error::DimensionMismatch { expected: g.num_voxels(), actual: exp.faces.len() });
    }
    if exp.exposed_count() == 0 {
        return Err(Error::InvalidInput("surface has no exposed faces".into()));
    }
    let h = g.h();
    let mut panels = Vec::with_capacity(exp.exposed_count() * s * s);
    for (v, faces) in exp.faces.iter().enumerate() {
        let corners = &g.voxel_corners()[v];
        let origin = g.vertex_position(corners[0]);
        for (f, _) in faces.iter().enumerate().filter(|(_, &e)| e) {
            let nrm = FACE_NORMALS[f];
            let axis = nrm.iter().position(|&c| c != 0).expect("unit face normal");
            let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
            let fixed = if nrm[axis] > 0 { 1.0 } else { 0.0 };
            for a in 0..s {
                for b in 0..s {
                    let mut t = [0.0; 3];
                    t[axis] = fixed;
                    t[ua] = (a as f64 + 0.5) / s as f64;
                    t[va] = (b as f64 + 0.5) / s as f64;
                    let ids = FACE_CORNERS[f];
                    let mut weights = [0.0; 4];
                    for (w, &c) in weights.iter_mut().zip(&ids) {
                        *w = (0..3)
                            .filter(|&d| d != axis)
                            .map(|d| if CORNER_OFFSETS[c][d] == 1 { t[d] } else { 1.0 - t[d] })
                            .product();
                    }
                    panels.push(Panel {
                        center: [0, 1, 2].map(|d| origin[d] + t[d] * h),
                        normal: nrm.map(|c| c as f64),
                        side: h / s as f64,
                        corners: ids.map(|c| corners[c]),
                        weights,
                    });
                }
            }
        }
    }
    Ok(BemSurface { panels, h, subdivision: s })
}

/// Smallest subdivision with `κ · panel side < 1`.
pub fn subdivision_for(kappa: f64, h: f64) -> usize {
    (kappa * h).floor() as usize + 1
}

/// Air constants, overridable through `MODALVOX_SOUND_SPEED` and
/// `MODALVOX_AIR_DENSITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Air {
    pub c: f64,
    pub rho: f64,
}

impl Default for Air {
    fn default() -> Self {
        Self { c: SOUND_SPEED, rho: AIR_DENSITY }
    }
}

impl Air {
    pub fn from_env() -> Result<Self> {
        let read = |key: &str, default: f64| -> Result<f64> {
            match std::env::var(key) {
                Ok(s) => s
                    .parse::<f64>()
                    .ok()
                    .filter(|v| *v > 0.0 && v.is_finite())
                    .ok_or_else(|| Error::InvalidInput(format!("{key} must be a positive number, got {s:?}"))),
                Err(_) => Ok(default),
            }
        };
        Ok(Self {
            c: read("MODALVOX_SOUND_SPEED", SOUND_SPEED)?,
            rho: read("MODALVOX_AIR_DENSITY", AIR_DENSITY)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelmholtzContext {
    /// Angular frequency, rad/s.
    pub omega: f64,
    pub air: Air,
}

impl HelmholtzContext {
    pub fn new(omega: f64, air: Air) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidInput(format!("omega must be positive, got {omega}")));
        }
        Ok(Self { omega, air })
    }

    /// Wavenumber `κ = ω / c`, 1/m.
    pub fn kappa(&self) -> f64 {
        self.omega / self.air.c
    }
}

/// `∂p/∂n = ρ_air ω² d_n`, with `d_n` the mode displacement interpolated to
/// each panel center and projected on its normal.
pub fn neumann_from_mode(surface: &BemSurface, mode: &[f64], ctx: &HelmholtzContext) -> Result<Vec<Complex64>> {
    let needed = surface
        .panels
        .iter()
        .flat_map(|p| p.corners)
        .max()
        .map_or(0, |v| 3 * (v + 1));
    if mode.len() < needed || mode.len() % 3 != 0 {
        return Err(Error::DimensionMismatch { expected: needed, actual: mode.len() });
    }
    let scale = ctx.air.rho * ctx.omega * ctx.omega;
    Ok(surface
        .panels
        .iter()
        .map(|p| {
            let dn: f64 = p
                .corners
                .iter()
                .zip(p.weights)
                .map(|(&v, w)| w * (0..3).map(|a| mode[3 * v + a] * p.normal[a]).sum::<f64>())
                .sum();
            Complex64::new(scale * dn, 0.0)
        })
        .collect())
}

/// Single- and double-layer matrices of one surface at one frequency.
#[derive(Debug, Clone)]
pub struct CbieSystem {
    pub v: DMatrix<Complex64>,
    pub k: DMatrix<Complex64>,
    pub kappa: f64,
    pub omega: f64,
}

fn green(kappa: f64, r: f64) -> Complex64 {
    Complex64::from_polar(1.0, kappa * r) / (4.0 * PI * r)
}

/// `∂G/∂n_y` for source `y` with normal `n`, target `x`.
fn green_dn(kappa: f64, x: [f64; 3], y: [f64; 3], n: [f64; 3]) -> Complex64 {
    let d = [y[0] - x[0], y[1] - x[1], y[2] - x[2]];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let cos = (d[0] * n[0] + d[1] * n[1] + d[2] * n[2]) / r;
    Complex64::from_polar(1.0, kappa * r) * Complex64::new(-1.0, kappa * r) / (4.0 * PI * r * r) * cos
}

/// Static integral of `1/4πr` over a square of side `s`, observed at its center.
fn self_single_layer(kappa: f64, s: f64) -> Complex64 {
    Complex64::new(s * (1.0 + 2f64.sqrt()).ln() / PI, kappa * s * s / (4.0 * PI))
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn assemble_cbie(surface: &BemSurface, ctx: &HelmholtzContext) -> Result<CbieSystem> {
    let kappa = ctx.kappa();
    let kh = kappa * surface.panel_side();
    if kh >= 1.0 {
        return Err(Error::ResolutionViolation { kappa_h: kh });
    }
    let n = surface.len();
    if n > MAX_PANELS {
        return Err(Error::SizeLimit { size: n, limit: MAX_PANELS });
    }
    let p = &surface.panels;
    let mut v = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    v.as_mut_slice()
        .par_chunks_mut(n)
        .zip(k.as_mut_slice().par_chunks_mut(n))
        .enumerate()
        .for_each(|(j, (vc, kc))| {
            let src = &p[j];
            let area = src.area();
            for i in 0..n {
                if i == j {
                    vc[i] = self_single_layer(kappa, src.side);
                    continue;
                }
                let r = distance(p[i].center, src.center);
                vc[i] = green(kappa, r) * area;
                kc[i] = -green_dn(kappa, p[i].center, src.center, src.normal) * area;
            }
        });
    debug!("assembled {n}-panel boundary system at κh = {kh:.3}");
    Ok(CbieSystem { v, k, kappa, omega: ctx.omega })
}

/// Surface pressure from Neumann data by dense LU.
pub fn solve_surface_pressure(sys: &CbieSystem, neumann: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = sys.v.nrows();
    if neumann.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: neumann.len() });
    }
    let q = DVector::from_iterator(n, neumann.iter().map(|z| -z));
    let rhs = &sys.v * q;
    let rhs_norm = rhs.norm();
    if rhs_norm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }
    let mut a = sys.k.clone();
    for d in 0..n {
        a[(d, d)] += 0.5;
    }
    let lu = a.clone().lu();
    let pivots = lu.u().diagonal().map(|z| z.norm());
    let (lo, hi) = (pivots.min(), pivots.max());
    if !(lo > SINGULAR_PIVOT_RATIO * hi) {
        return Err(Error::SingularBoundarySystem { omega: sys.omega });
    }
    let p = lu.solve(&rhs).ok_or(Error::SingularBoundarySystem { omega: sys.omega })?;
    let residual = (&a * &p - &rhs).norm() / rhs_norm;
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::Numerical(format!("boundary solve residual {residual:.3e} exceeds {RESIDUAL_TOL:e}")));
    }
    Ok(p.as_slice().to_vec())
}

/// Field pressure `V(−q) − K p` at exterior points.
pub fn evaluate_potential(
    surface: &BemSurface,
    p_surf: &[Complex64],
    dn_p: &[Complex64],
    points: &[[f64; 3]],
    ctx: &HelmholtzContext,
) -> Result<Vec<Complex64>> {
    let n = surface.len();
    for len in [p_surf.len(), dn_p.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, actual: len });
        }
    }
    let kappa = ctx.kappa();
    points
        .par_iter()
        .map(|&x| {
            let mut sum = Complex64::new(0.0, 0.0);
            let mut nearest = f64::INFINITY;
            for (j, src) in surface.panels.iter().enumerate() {
                let r = distance(x, src.center);
                nearest = nearest.min(r);
                let area = src.area();
                sum -= green(kappa, r) * area * dn_p[j];
                sum += green_dn(kappa, x, src.center, src.normal) * area * p_surf[j];
            }
            if nearest <= surface.h {
                return Err(Error::PointTooClose { distance: nearest, min_distance: surface.h });
            }
            Ok(sum)
        })
        .collect()
}

/// Header of a `.bemout` surface dump. The payload is `p_surf` then `∂p/∂n`,
/// each as interleaved (re, im) f64 pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BemoutHeader {
    pub omega: f64,
    pub kappa: f64,
    pub nelem: usize,
}

pub fn write_bemout<W: Write>(w: W, header: &BemoutHeader, p_surf: &[Complex64], dn_p: &[Complex64]) -> Result<()> {
    if p_surf.len() != header.nelem || dn_p.len() != header.nelem {
        return Err(Error::InvalidInput("surface fields must have nelem entries".into()));
    }
    let flat: Vec<f64> = p_surf.iter().chain(dn_p).flat_map(|z| [z.re, z.im]).collect();
    let mut payload = Vec::with_capacity(8 * flat.len());
    f64s_to_le(&flat, &mut payload);
    write_container(w, header, &payload)
}

pub fn read_bemout<R: BufRead>(r: R) -> Result<(BemoutHeader, Vec<Complex64>, Vec<Complex64>)> {
    let (header, payload): (BemoutHeader, _) = read_container(r)?;
    let count = 4 * header.nelem;
    if payload.len() != 8 * count {
        return Err(Error::Format(format!("bemout payload holds {} bytes, expected {}", payload.len(), 8 * count)));
    }
    let flat = le_to_f64s(&payload, count)?;
    let mut z = flat.chunks_exact(2).map(|c| Complex64::new(c[0], c[1]));
    let p: Vec<_> = z.by_ref().take(header.nelem).collect();
    Ok((header, p, z.collect()))
}
