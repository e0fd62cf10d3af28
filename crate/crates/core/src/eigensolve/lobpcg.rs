use std::time::Instant;

use log::{debug, warn};
use nalgebra::DMatrix;

use super::linalg::{random_block, SymOperator};
use super::residual::{norm2, residual_error};
use super::ritz::rayleigh_ritz;
use super::svqb::{m_project_out, svqb, SubspaceBasis};
use super::{ModeSet, SolveReport};
use crate::error::{Error, Result};
use crate::hexfem::AssembledSystem;

/// Ritz values below this fraction of the first audible one are rigid motions.
pub const RIGID_REL_TOL: f64 = 1e-6;

const MAX_RESTARTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    /// Inverse diagonal of `K`.
    Jacobi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LobpcgOptions {
    /// Audible modes wanted.
    pub modes: usize,
    /// Extra block columns reserved for rigid motions.
    pub rigid_buffer: usize,
    /// Extra unjudged columns above the audible window.
    pub guard: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
    /// Seed for padding and restart directions.
    pub seed: u64,
}

impl Default for LobpcgOptions {
    fn default() -> Self {
        Self {
            modes: 20,
            rigid_buffer: 6,
            guard: 6,
            tol: 1e-6,
            max_iter: 500,
            preconditioner: Preconditioner::None,
            seed: 0,
        }
    }
}

struct Run {
    x: DMatrix<f64>,
    lambdas: Vec<f64>,
    history: Vec<f64>,
    elapsed: Vec<f64>,
    initial: f64,
    restarts: usize,
    converged: bool,
}

/// Block LOBPCG for the lowest `modes` non-rigid eigenpairs of `(K, M)`.
///
/// The block holds `rigid_buffer + modes + guard` columns. The lowest
/// `rigid_buffer` Ritz pairs absorb the rigid motions, the next `modes` are
/// the audible window on which convergence is judged, and the guard columns
/// above keep the window edge away from the block edge. The trial basis
/// `[X, W, P]` is built blockwise M-orthonormal with SVQB; converged columns are soft-locked (they stay in `X` but contribute
/// no new directions). If the audible window still holds near-zero values
/// at the end, the body has more rigid motions than the buffer and the
/// solve is repeated with a larger block.
pub fn lobpcg(sys: &AssembledSystem, x0: &SubspaceBasis, opts: &LobpcgOptions) -> Result<(ModeSet, SolveReport)> {
    let start = Instant::now();
    let n = sys.ndof();
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if opts.modes == 0 {
        return Err(Error::InvalidInput("at least one mode must be requested".into()));
    }
    let mut buffer = opts.rigid_buffer;
    let mut guess = x0.clone();
    let mut restarts = 0;
    for attempt in 0..2 {
        let block = opts.modes + buffer + opts.guard;
        if 3 * block > n {
            return Err(Error::InvalidInput(format!(
                "block of {block} vectors is too large for {n} degrees of freedom"
            )));
        }
        let run = iterate(sys, &guess, opts, buffer, start)?;
        restarts += run.restarts;
        // A rigid motion beyond the buffer shows up as a near-zero value in
        // the audible window.
        let first_audible = run.lambdas[buffer];
        let extra = run.lambdas[buffer..].iter().filter(|&&l| l < RIGID_REL_TOL * first_audible).count();
        if extra > 0 {
            if attempt == 0 {
                warn!("{extra} rigid modes beyond the buffer of {buffer}; re-solving with a larger block");
                buffer += extra;
                guess = SubspaceBasis::raw(run.x);
                continue;
            }
            return Err(Error::Numerical(format!(
                "{} near-zero modes remain after enlarging the rigid buffer to {buffer}",
                extra
            )));
        }
        let rigid = buffer;
        let mut vectors = run.x.columns(rigid, opts.modes).into_owned();
        normalize_signs(&mut vectors);
        let lambdas = run.lambdas[rigid..rigid + opts.modes].to_vec();
        let norms = sys.norms();
        let residuals: Vec<f64> = (0..opts.modes)
            .map(|i| residual_error(&sys.k, &sys.m, norms, vectors.column(i).as_slice(), lambdas[i]))
            .collect();
        let converged = run.converged && residuals.iter().all(|&r| r < opts.tol);
        let modes = ModeSet::new(lambdas, vectors, residuals, sys.material.alpha, sys.material.beta);
        let report = SolveReport {
            iterations: run.history.len(),
            wall_time: start.elapsed(),
            residual_history: run.history,
            elapsed_history: run.elapsed,
            initial_residual: run.initial,
            provenance: String::new(),
            restarts,
            rigid_modes_dropped: rigid,
            converged,
        };
        return Ok((modes, report));
    }
    unreachable!("second attempt always returns")
}

fn iterate(
    sys: &AssembledSystem,
    x0: &SubspaceBasis,
    opts: &LobpcgOptions,
    buffer: usize,
    clock: Instant,
) -> Result<Run> {
    let (k, m) = (&sys.k, &sys.m);
    let n = sys.ndof();
    let norms = sys.norms();
    let b = opts.modes + buffer + opts.guard;
    let jacobi: Option<Vec<f64>> = match opts.preconditioner {
        Preconditioner::None => None,
        Preconditioner::Jacobi => Some(k.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect()),
    };

    let mut seed = opts.seed ^ 0x9e37_79b9_7f4a_7c15;
    let mut fresh = |cols: usize| {
        seed = seed.wrapping_add(1);
        random_block(n, cols, seed)
    };

    let mut start = x0.clone();
    if start.ncols() < b {
        let pad = fresh(b - start.ncols());
        let mut v = DMatrix::zeros(n, b);
        v.columns_mut(0, start.ncols()).copy_from(&start.vectors);
        v.columns_mut(start.ncols(), b - start.ncols()).copy_from(&pad);
        start = SubspaceBasis::raw(v);
    }
    let mut restarts = 0;
    let rr = match rayleigh_ritz(&start, k, m) {
        Ok(rr) if rr.values.len() >= b => rr,
        _ => {
            restarts += 1;
            rayleigh_ritz(&SubspaceBasis::raw(fresh(b)), k, m)?
        }
    };
    let mut x = rr.vectors.columns(0, b).into_owned();
    let mut lam: Vec<f64> = rr.values[..b].to_vec();
    let mut p: Option<DMatrix<f64>> = None;
    let mut history = Vec::new();
    let mut elapsed = Vec::new();
    let mut initial = f64::NAN;
    let mut converged = false;

    loop {
        let kx = k.apply(&x);
        let mx = m.apply(&x);
        let mut r = kx;
        for j in 0..b {
            r.column_mut(j).axpy(-lam[j], &mx.column(j), 1.0);
        }
        let res: Vec<f64> = (0..b)
            .map(|j| {
                norm2(r.column(j).as_slice()) / ((norms.k + lam[j].abs() * norms.m) * norm2(x.column(j).as_slice()))
            })
            .collect();
        let worst = res[buffer..buffer + opts.modes].iter().cloned().fold(0.0, f64::max);
        if initial.is_nan() {
            initial = worst;
        } else {
            history.push(worst);
            elapsed.push(clock.elapsed().as_secs_f64());
        }
        debug!("lobpcg iteration {}: max residual {worst:.3e}", history.len());
        if worst < opts.tol {
            converged = true;
            break;
        }
        if history.len() >= opts.max_iter {
            break;
        }

        let active: Vec<usize> = (0..b).filter(|&j| res[j] >= opts.tol).collect();
        let mut w = r.select_columns(&active);
        if let Some(d) = &jacobi {
            for mut col in w.column_iter_mut() {
                for (v, s) in col.iter_mut().zip(d) {
                    *v *= s;
                }
            }
        }
        m_project_out(&mut w, &x, m);
        let w = orthonormal_or_none(w, m);
        let p_orth = p.take().and_then(|mut pp| {
            m_project_out(&mut pp, &x, m);
            if let Some(w) = &w {
                m_project_out(&mut pp, w, m);
            }
            orthonormal_or_none(pp, m)
        });

        let nw = w.as_ref().map_or(0, |w| w.ncols());
        let np = p_orth.as_ref().map_or(0, |p| p.ncols());
        let mut s = DMatrix::zeros(n, b + nw + np);
        s.columns_mut(0, b).copy_from(&x);
        if let Some(w) = &w {
            s.columns_mut(b, nw).copy_from(w);
        }
        if let Some(p) = &p_orth {
            s.columns_mut(b + nw, np).copy_from(p);
        }
        let basis = SubspaceBasis { vectors: s, m_orthonormal: true };
        let rr = match rayleigh_ritz(&basis, k, m) {
            Ok(rr) if nw > 0 => rr,
            outcome => {
                restarts += 1;
                if restarts > MAX_RESTARTS {
                    return Err(match outcome {
                        Err(e) => e,
                        Ok(_) => Error::Numerical("LOBPCG search directions collapsed".into()),
                    });
                }
                warn!("LOBPCG breakdown, restarting with fresh directions ({restarts}/{MAX_RESTARTS})");
                let mut v = DMatrix::zeros(n, 2 * b);
                v.columns_mut(0, b).copy_from(&x);
                v.columns_mut(b, b).copy_from(&fresh(b));
                let rr = rayleigh_ritz(&svqb(&SubspaceBasis::raw(v), m)?, k, m)?;
                x = rr.vectors.columns(0, b).into_owned();
                lam = rr.values[..b].to_vec();
                continue;
            }
        };
        let c = &rr.coefficients;
        x = rr.vectors.columns(0, b).into_owned();
        lam = rr.values[..b].to_vec();
        if nw + np > 0 {
            let tail = basis.vectors.columns(b, nw + np);
            let coeff = c.rows(b, nw + np).select_columns(&active);
            p = Some(tail * coeff);
        }
    }

    Ok(Run {
        x,
        lambdas: lam,
        history,
        elapsed,
        initial,
        restarts,
        converged,
    })
}

fn orthonormal_or_none(w: DMatrix<f64>, m: &dyn SymOperator) -> Option<DMatrix<f64>> {
    if w.ncols() == 0 || w.amax() == 0.0 {
        return None;
    }
    svqb(&SubspaceBasis::raw(w), m).ok().map(|s| s.vectors)
}

/// Makes the largest-magnitude entry of every column positive.
pub(crate) fn normalize_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0;
        for i in 0..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}
