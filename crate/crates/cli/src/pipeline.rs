//! End-to-end run: geometry → modes → transfer maps → audio.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use modalvox::eigensolve::{mixed_solve, write_modes, LobpcgOptions, ModeSet, ModesHeader, SolveReport, WarmStart};
use modalvox::ffat::{fit_from_surface, sample_pattern, write_ffat, write_png, FfatMap, FfatRange, PIXELS};
use modalvox::hexfem::{AssembledSystem, Material};
use modalvox::radiation::{
    assemble_cbie, build_surface, build_surface_subdivided, neumann_from_mode, solve_surface_pressure,
    subdivision_for, Air, HelmholtzContext, MAX_PANELS,
};
use modalvox::shapes::{gen_shape, ShapeKind};
use modalvox::synth::{render_with_gains, wav_export, ForceEvent, DEFAULT_SAMPLE_RATE};
use modalvox::voxgrid::{read_vgrid, voxelize, TriMesh, VoxelGrid};
use serde::Serialize;

use crate::error::{Result, Stage};

/// Where the voxel grid comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Shape { kind: ShapeKind, res: u32 },
    /// Triangle mesh voxelized to `res` voxels along its longest axis.
    Mesh { path: PathBuf, res: u32 },
    /// A `.vgrid` file.
    Grid(PathBuf),
}

/// Loads or generates the grid. Shapes use voxel size `h`; meshes and grid
/// files keep their own.
pub fn load_grid(source: &Source, h: f64) -> Result<VoxelGrid> {
    match source {
        Source::Shape { kind, res } => gen_shape(*kind, *res, h).stage("geometry"),
        Source::Mesh { path, res } => {
            let mesh = TriMesh::load(path).stage("geometry")?;
            voxelize(&mesh, *res).stage("voxelize")
        }
        Source::Grid(path) => {
            let f = File::open(path).stage("geometry")?;
            read_vgrid(BufReader::new(f)).stage("geometry")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferKind {
    /// Boundary-element solve fitted to a map.
    Bem,
    /// Panel budget exceeded; isotropic high-frequency estimate.
    Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeTransfer {
    pub mode: usize,
    pub freq_hz: f64,
    pub kind: TransferKind,
    pub panels: usize,
    pub kappa_h: f64,
}

/// Unit-efficiency isotropic far field: radiated power `½ρc ω² ⟨d_n²⟩ S`
/// spread evenly over the sphere gives `ψ = ρ c ω √(⟨d_n²⟩ S / 4π)`.
fn isotropic_estimate(grid: &VoxelGrid, mode: &[f64], ctx: &HelmholtzContext) -> modalvox::Result<f64> {
    let surface = build_surface(grid, &grid.surface_exposure())?;
    let q = neumann_from_mode(&surface, mode, ctx)?;
    let to_dn = 1.0 / (ctx.air.rho * ctx.omega * ctx.omega);
    let mean_sq = q.iter().map(|z| (z.re * to_dn).powi(2)).sum::<f64>() / q.len() as f64;
    Ok(ctx.air.rho * ctx.air.c * ctx.omega * (mean_sq * surface.area() / (4.0 * PI)).sqrt())
}

/// Transfer map of one mode at its undamped frequency.
pub fn radiate_mode(
    grid: &VoxelGrid,
    mode: &[f64],
    omega: f64,
    air: Air,
    range: FfatRange,
    max_panels: usize,
) -> modalvox::Result<(FfatMap, TransferKind, usize, f64)> {
    let ctx = HelmholtzContext::new(omega, air)?;
    let (center, a) = grid.center_and_extent();
    let pattern = sample_pattern(center, a, range)?;
    let exposure = grid.surface_exposure();
    let s = subdivision_for(ctx.kappa(), grid.h());
    let panels = exposure.exposed_count() * s * s;
    let kappa_h = ctx.kappa() * grid.h() / s as f64;
    if panels > max_panels.min(MAX_PANELS) {
        let psi = isotropic_estimate(grid, mode, &ctx)?;
        let map = FfatMap::from_psi(vec![psi; PIXELS], center, a, pattern.radii.clone())?;
        return Ok((map, TransferKind::Estimate, panels, kappa_h));
    }
    let surface = build_surface_subdivided(grid, &exposure, s)?;
    let q = neumann_from_mode(&surface, mode, &ctx)?;
    let sys = assemble_cbie(&surface, &ctx)?;
    let p = solve_surface_pressure(&sys, &q)?;
    let map = fit_from_surface(&surface, &p, &q, &ctx, &pattern)?;
    Ok((map, TransferKind::Bem, panels, kappa_h))
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub source: Source,
    pub h: f64,
    pub material: Material,
    pub modes: usize,
    pub tol: f64,
    pub seed: u64,
    pub warm: WarmStart,
    pub range: FfatRange,
    /// Listener relative to the object center; defaults to twice the
    /// innermost map radius along a fixed oblique direction.
    pub listener: Option<[f64; 3]>,
    /// Defaults to one unit tap at vertex 0.
    pub events: Option<Vec<ForceEvent>>,
    pub rate: u32,
    pub duration: f64,
    pub normalize: bool,
    pub max_panels: usize,
    pub air: Air,
    pub out_dir: PathBuf,
}

impl PipelineConfig {
    pub fn new(source: Source, material: Material, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            source,
            h: modalvox::shapes::DEFAULT_VOXEL_SIZE,
            material,
            modes: 10,
            tol: 1e-6,
            seed: 0,
            warm: WarmStart::Krylov { modes: 20, depth: 1 },
            range: FfatRange::Far,
            listener: None,
            events: None,
            rate: DEFAULT_SAMPLE_RATE,
            duration: 2.0,
            normalize: true,
            max_panels: MAX_PANELS,
            air: Air::default(),
            out_dir: out_dir.into(),
        }
    }
}

const LISTENER_DIRECTION: [f64; 3] = [0.36, 0.48, 0.8];

pub fn default_events() -> Vec<ForceEvent> {
    let d = 14f64.sqrt();
    vec![ForceEvent { time: 0.0, vertex: 0, direction: [1.0 / d, 2.0 / d, 3.0 / d], amplitude: 1.0 }]
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineSummary {
    pub material: String,
    pub h: f64,
    pub voxels: usize,
    pub ndof: usize,
    pub freqs_hz: Vec<f64>,
    pub solve: SolveReport,
    pub transfers: Vec<ModeTransfer>,
    pub listener: [f64; 3],
    pub gains: Vec<f64>,
    pub modes_file: PathBuf,
    pub ffat_files: Vec<PathBuf>,
    pub wav_file: PathBuf,
}

pub fn modes_header(cfg_material: &Material, h: f64, seed: u64, tol: f64, solver: &str, modes: &ModeSet) -> ModesHeader {
    ModesHeader {
        k: modes.len(),
        ndof: modes.ndof(),
        material: cfg_material.name.clone(),
        h,
        seed,
        solver: solver.to_string(),
        tol,
        alpha: cfg_material.alpha,
        beta: cfg_material.beta,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).stage("export")?))
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary> {
    fs::create_dir_all(&cfg.out_dir).stage("export")?;
    let grid = Arc::new(load_grid(&cfg.source, cfg.h)?);
    info!("grid: {} voxels, {} dof", grid.num_voxels(), grid.ndof());
    let sys = AssembledSystem::build(grid.clone(), &cfg.material).stage("assembly")?;
    let opts = LobpcgOptions { modes: cfg.modes, tol: cfg.tol, seed: cfg.seed, ..Default::default() };
    let (modes, report) = mixed_solve(&sys, &cfg.warm, &opts).stage("modal")?;
    if !report.converged {
        warn!("eigensolver stopped after {} iterations without reaching {:e}", report.iterations, cfg.tol);
    }

    let modes_file = cfg.out_dir.join("modes.modes");
    let header = modes_header(&cfg.material, grid.h(), cfg.seed, cfg.tol, &report.provenance, &modes);
    write_modes(create(&modes_file)?, &header, &modes).stage("export")?;

    let ffat_dir = cfg.out_dir.join("ffat");
    fs::create_dir_all(&ffat_dir).stage("export")?;
    let mut maps = Vec::with_capacity(modes.len());
    let mut transfers = Vec::with_capacity(modes.len());
    let mut ffat_files = Vec::new();
    for i in 0..modes.len() {
        let omega = modes.lambdas[i].max(0.0).sqrt();
        let v = modes.vectors.column(i);
        let (map, kind, panels, kappa_h) =
            radiate_mode(&grid, v.as_slice(), omega, cfg.air, cfg.range, cfg.max_panels).stage("radiation")?;
        if kind == TransferKind::Estimate {
            warn!(
                "mode {i} at {:.1} Hz needs {panels} panels (limit {}); using the isotropic transfer estimate",
                modes.freqs_hz[i], cfg.max_panels
            );
        }
        let path = ffat_dir.join(format!("mode_{i:03}.ffat"));
        write_ffat(create(&path)?, &map).stage("export")?;
        write_png(&map, &path.with_extension("png")).stage("export")?;
        ffat_files.push(path);
        transfers.push(ModeTransfer { mode: i, freq_hz: modes.freqs_hz[i], kind, panels, kappa_h });
        maps.push(map);
    }

    let listener = cfg.listener.unwrap_or_else(|| {
        let r = 2.0 * maps.first().and_then(|m| m.radii.first().copied()).unwrap_or(1.0);
        LISTENER_DIRECTION.map(|d| d * r)
    });
    let events = cfg.events.clone().unwrap_or_else(default_events);
    let gains = maps
        .iter()
        .map(|m| modalvox::ffat::query(m, [0, 1, 2].map(|k| m.center[k] + listener[k])))
        .collect::<modalvox::Result<Vec<_>>>()
        .stage("render")?;
    let audio = render_with_gains(&modes, &gains, &events, cfg.rate, cfg.duration).stage("render")?;
    let wav_file = cfg.out_dir.join("render.wav");
    wav_export(&audio, &wav_file, cfg.normalize).stage("export")?;

    let summary = PipelineSummary {
        material: cfg.material.name.clone(),
        h: grid.h(),
        voxels: grid.num_voxels(),
        ndof: grid.ndof(),
        freqs_hz: modes.freqs_hz.clone(),
        solve: report,
        transfers,
        listener,
        gains,
        modes_file,
        ffat_files,
        wav_file,
    };
    let json = serde_json::to_string_pretty(&summary).stage("export")?;
    fs::write(cfg.out_dir.join("summary.json"), json).stage("export")?;
    Ok(summary)
}
