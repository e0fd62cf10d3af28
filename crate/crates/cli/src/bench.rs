//! Vibration benchmark: iterations and time to reach each tolerance for a
//! set of solver configurations, measured against a reference solve.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use modalvox::eigensolve::{
    dense_oracle, freq_error, lobpcg, mixed_solve, random_block, residual_error, LobpcgOptions, SubspaceBasis,
    WarmStart, DENSE_ORACLE_LIMIT,
};
use modalvox::hexfem::{AssembledSystem, Material};
use modalvox::shapes::BenchShape;
use serde::Serialize;

use crate::error::{Result, Stage};

/// Audible modes in the default benchmark. With the six rigid motions this
/// fills the 20-vector Krylov basis exactly.
pub const BENCH_MODES: usize = 14;
pub const BENCH_TOLS: [f64; 3] = [1e-2, 5e-3, 1e-3];
pub const REFERENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverConfig {
    LobpcgRandom,
    MixedKrylov { modes: usize, depth: usize },
}

impl SolverConfig {
    pub fn warm_start(&self) -> WarmStart {
        match *self {
            SolverConfig::LobpcgRandom => WarmStart::Random,
            SolverConfig::MixedKrylov { modes, depth } => WarmStart::Krylov { modes, depth },
        }
    }
}

impl fmt::Display for SolverConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverConfig::LobpcgRandom => write!(f, "lobpcg-random"),
            SolverConfig::MixedKrylov { modes, depth } => write!(f, "mixed-krylov({modes},{depth})"),
        }
    }
}

impl FromStr for SolverConfig {
    type Err = modalvox::Error;

    /// `lobpcg-random` or `mixed-krylov(k,J)`.
    fn from_str(s: &str) -> modalvox::Result<Self> {
        let bad = || modalvox::Error::InvalidInput(format!("unknown solver config `{s}`"));
        if s == "lobpcg-random" {
            return Ok(SolverConfig::LobpcgRandom);
        }
        let inner = s.strip_prefix("mixed-krylov(").and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
        let (k, j) = inner.split_once(',').ok_or_else(bad)?;
        Ok(SolverConfig::MixedKrylov {
            modes: k.trim().parse().map_err(|_| bad())?,
            depth: j.trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub modes: usize,
    pub guard: usize,
    pub tols: Vec<f64>,
    pub seeds: u64,
    pub base_seed: u64,
    pub material: Material,
    pub h: f64,
    pub max_iter: usize,
    /// Include wall-clock columns. Without them reports are byte-identical
    /// across reruns.
    pub timings: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            modes: BENCH_MODES,
            guard: 6,
            tols: BENCH_TOLS.to_vec(),
            seeds: 20,
            base_seed: 0,
            material: Material::by_name("ceramic").expect("built-in material"),
            h: modalvox::shapes::DEFAULT_VOXEL_SIZE,
            max_iter: 500,
            timings: true,
        }
    }
}

/// Medians over seeds for one (shape, config, tol).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub shape: String,
    pub config: String,
    pub tol: f64,
    pub median_iterations: f64,
    /// Runs that reached `tol` within the iteration cap.
    pub reached: usize,
    pub runs: usize,
    /// Median seconds to reach `tol`, warm-start setup included.
    pub median_seconds: Option<f64>,
    /// Median of the largest per-mode residual at the end of the run.
    pub final_residual: f64,
    /// Median Mel-frequency MSE against the reference at the end of the run.
    pub mel_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub shape: String,
    pub ndof: usize,
    pub method: String,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub references: Vec<ReferenceRow>,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

struct Reference {
    freqs: Vec<f64>,
    row: ReferenceRow,
}

fn reference(shape: &BenchShape, sys: &AssembledSystem, opts: &BenchOptions) -> Result<Reference> {
    let n = sys.ndof();
    let k = opts.modes;
    let norms = sys.norms();
    let (lambdas, vectors, method) = if n <= DENSE_ORACLE_LIMIT {
        let e = dense_oracle(&sys.k.to_dense(), &sys.m.to_dense()).stage("reference")?;
        (e.values.as_slice()[6..6 + k].to_vec(), e.vectors.columns(6, k).into_owned(), "dense".to_string())
    } else {
        let lo = LobpcgOptions { modes: k, guard: opts.guard, tol: REFERENCE_TOL, max_iter: 4 * opts.max_iter, seed: opts.base_seed, ..Default::default() };
        let x0 = SubspaceBasis::raw(random_block(n, k + lo.rigid_buffer + lo.guard, opts.base_seed));
        let (m, _) = lobpcg(sys, &x0, &lo).stage("reference")?;
        (m.lambdas, m.vectors, format!("lobpcg({REFERENCE_TOL:e})"))
    };
    let max_residual = (0..k)
        .map(|i| residual_error(&sys.k, &sys.m, norms, vectors.column(i).as_slice(), lambdas[i]))
        .fold(0.0, f64::max);
    let freqs = lambdas.iter().map(|l| l.max(0.0).sqrt() / (2.0 * std::f64::consts::PI)).collect();
    Ok(Reference { freqs, row: ReferenceRow { shape: shape.name.clone(), ndof: n, method, max_residual } })
}

/// Runs every config on every shape for `opts.seeds` seeds. Each run goes
/// to the tightest tolerance once; the looser tolerances are read off its
/// residual history.
pub fn bench_vibration(shapes: &[BenchShape], configs: &[SolverConfig], opts: &BenchOptions) -> Result<BenchReport> {
    let tightest = opts.tols.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut rows = Vec::new();
    let mut references = Vec::new();
    for shape in shapes {
        let grid = shape.generate(opts.h).stage("geometry")?;
        let sys = AssembledSystem::build(Arc::new(grid), &opts.material).stage("assembly")?;
        let reference = reference(shape, &sys, opts)?;
        for config in configs {
            let mut iters = vec![Vec::new(); opts.tols.len()];
            let mut times = vec![Vec::new(); opts.tols.len()];
            let mut reached = vec![0; opts.tols.len()];
            let (mut finals, mut mels) = (Vec::new(), Vec::new());
            for s in 0..opts.seeds {
                let lo = LobpcgOptions {
                    modes: opts.modes,
                    guard: opts.guard,
                    tol: tightest,
                    max_iter: opts.max_iter,
                    seed: opts.base_seed + s,
                    ..Default::default()
                };
                let (modes, report) = mixed_solve(&sys, &config.warm_start(), &lo).stage("modal")?;
                for (t, &tol) in opts.tols.iter().enumerate() {
                    match report.iterations_to(tol) {
                        Some(it) => {
                            reached[t] += 1;
                            iters[t].push(it as f64);
                            times[t].push(report.time_to(tol).unwrap_or(f64::NAN));
                        }
                        None => {
                            iters[t].push((report.iterations + 1) as f64);
                            times[t].push(f64::INFINITY);
                        }
                    }
                }
                finals.push(modes.residuals.iter().cloned().fold(0.0, f64::max));
                mels.push(freq_error(&modes.freqs_hz, &reference.freqs));
            }
            let (final_residual, mel_mse) = (median(&mut finals), median(&mut mels));
            for (t, &tol) in opts.tols.iter().enumerate() {
                rows.push(BenchRow {
                    shape: shape.name.clone(),
                    config: config.to_string(),
                    tol,
                    median_iterations: median(&mut iters[t]),
                    reached: reached[t],
                    runs: opts.seeds as usize,
                    median_seconds: opts.timings.then(|| median(&mut times[t])),
                    final_residual,
                    mel_mse,
                });
            }
        }
        references.push(reference.row);
    }
    Ok(BenchReport { rows, references })
}

impl BenchReport {
    pub fn row(&self, shape: &str, config: &str, tol: f64) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.shape == shape && r.config == config && r.tol == tol)
    }

    pub fn to_markdown(&self) -> String {
        let timed = self.rows.iter().any(|r| r.median_seconds.is_some());
        let mut s = String::from("| shape | config | tol | median iterations | reached | ");
        if timed {
            s.push_str("median time (s) | ");
        }
        s.push_str("final residual | Mel MSE |\n|---|---|---|---|---|");
        if timed {
            s.push_str("---|");
        }
        s.push_str("---|---|\n");
        for r in &self.rows {
            s.push_str(&format!("| {} | {} | {:e} | {} | {}/{} | ", r.shape, r.config, r.tol, r.median_iterations, r.reached, r.runs));
            if let Some(t) = r.median_seconds {
                s.push_str(&format!("{t:.4} | "));
            }
            s.push_str(&format!("{:.3e} | {:.3e} |\n", r.final_residual, r.mel_mse));
        }
        s.push_str("\n| shape | dof | reference | max residual |\n|---|---|---|---|\n");
        for r in &self.references {
            s.push_str(&format!("| {} | {} | {} | {:.3e} |\n", r.shape, r.ndof, r.method, r.max_residual));
        }
        s
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let timed = self.rows.iter().any(|r| r.median_seconds.is_some());
        let mut header = vec!["shape", "config", "tol", "median_iterations", "reached", "runs"];
        if timed {
            header.push("median_seconds");
        }
        header.extend(["final_residual", "mel_mse"]);
        w.write_record(&header).map_err(csv_error).stage("bench")?;
        for r in &self.rows {
            let mut rec = vec![
                r.shape.clone(),
                r.config.clone(),
                format!("{:e}", r.tol),
                r.median_iterations.to_string(),
                r.reached.to_string(),
                r.runs.to_string(),
            ];
            if let Some(t) = r.median_seconds {
                rec.push(t.to_string());
            }
            rec.extend([format!("{:e}", r.final_residual), format!("{:e}", r.mel_mse)]);
            w.write_record(&rec).map_err(csv_error).stage("bench")?;
        }
        let bytes = w.into_inner().map_err(|e| modalvox::Error::Io(e.into_error())).stage("bench")?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_error(e: csv::Error) -> modalvox::Error {
    modalvox::Error::Format(e.to_string())
}
