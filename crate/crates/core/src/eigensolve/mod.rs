//! Generalized eigensolvers for `K U = M U Λ`.
//!
//! The building blocks are SVQB orthonormalization, Rayleigh–Ritz
//! projection and a backward-error residual metric. On top sit a Krylov
//! warm start through a shifted skyline Cholesky factor, block LOBPCG with
//! soft locking and rigid-mode filtering, and the mixed solve that chains a
//! warm-start provider into LOBPCG.

mod krylov;
mod linalg;
mod lobpcg;
mod mel;
mod mixed;
mod modes_file;
mod residual;
mod ritz;
mod skyline;
mod svqb;

use std::time::Duration;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use krylov::{krylov_warmstart, krylov_warmstart_with_shift, rigid_shift, KrylovConfig};
pub use linalg::{dense_oracle, random_block, DenseEigen, SymOperator, DENSE_ORACLE_LIMIT};
pub use lobpcg::{lobpcg, LobpcgOptions, Preconditioner, RIGID_REL_TOL};
pub use mel::{freq_error, mel, mel_normalized, mel_span, MAX_AUDIBLE_HZ, MIN_AUDIBLE_HZ};
pub use mixed::{mixed_solve, WarmStart};
pub use modes_file::{read_modes, read_warmstart, write_modes, write_warmstart, ModesHeader};
pub use residual::{mean_eigenvalue, power_norm, residual_error, MatrixNorms, NORM_POWER_ITERATIONS};
pub use ritz::{rayleigh_ritz, RitzPairs};
pub use skyline::SkylineCholesky;
pub use svqb::{svqb, svqb_pass, SubspaceBasis, SVQB_DROP_TOL};

/// Solved vibration modes with their derived frequencies and damping.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    /// Ascending eigenvalues, (rad/s)².
    pub lambdas: Vec<f64>,
    /// M-orthonormal eigenvectors, one column per mode.
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub freqs_hz: Vec<f64>,
    pub xi: Vec<f64>,
    /// Damped angular frequency; zero for overdamped modes.
    pub omega_damped: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl ModeSet {
    pub fn new(lambdas: Vec<f64>, vectors: DMatrix<f64>, residuals: Vec<f64>, alpha: f64, beta: f64) -> Self {
        let mut set = Self {
            lambdas,
            vectors,
            residuals,
            freqs_hz: Vec::new(),
            xi: Vec::new(),
            omega_damped: Vec::new(),
            alpha,
            beta,
        };
        set.set_damping(alpha, beta);
        set
    }

    /// Recomputes `ξ`, `ω'` and frequencies from `λ` and Rayleigh `(α, β)`.
    pub fn set_damping(&mut self, alpha: f64, beta: f64) {
        self.alpha = alpha;
        self.beta = beta;
        self.freqs_hz = self
            .lambdas
            .iter()
            .map(|&l| l.max(0.0).sqrt() / (2.0 * std::f64::consts::PI))
            .collect();
        self.xi = self
            .lambdas
            .iter()
            .map(|&l| {
                let w = l.max(0.0).sqrt();
                if w == 0.0 {
                    f64::INFINITY
                } else {
                    (alpha + beta * l) / (2.0 * w)
                }
            })
            .collect();
        self.omega_damped = self
            .lambdas
            .iter()
            .zip(&self.xi)
            .map(|(&l, &xi)| {
                if xi < 1.0 {
                    l.sqrt() * (1.0 - xi * xi).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn ndof(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_overdamped(&self, i: usize) -> bool {
        !(self.xi[i] < 1.0)
    }

    /// Largest deviation of `Vᵀ M V` from the identity.
    pub fn gram_deviation<Op: SymOperator + ?Sized>(&self, m: &Op) -> f64 {
        let g = self.vectors.transpose() * m.apply(&self.vectors);
        (g - DMatrix::identity(self.len(), self.len())).amax()
    }
}

/// Convergence record of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// LOBPCG updates performed.
    pub iterations: usize,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
    /// Max audible-mode residual after each update; `len == iterations`.
    pub residual_history: Vec<f64>,
    /// Seconds since the solve started, after each update.
    #[serde(default)]
    pub elapsed_history: Vec<f64>,
    /// Max audible-mode residual of the starting Ritz vectors.
    pub initial_residual: f64,
    pub provenance: String,
    pub restarts: usize,
    pub rigid_modes_dropped: usize,
    pub converged: bool,
}

impl SolveReport {
    /// Updates needed before the max residual fell below `tol`, or `None`
    /// if it never did.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        if self.initial_residual < tol {
            return Some(0);
        }
        self.residual_history.iter().position(|&r| r < tol).map(|i| i + 1)
    }

    /// Seconds until the max residual fell below `tol`.
    pub fn time_to(&self, tol: f64) -> Option<f64> {
        match self.iterations_to(tol)? {
            0 => Some(0.0),
            i => self.elapsed_history.get(i - 1).copied(),
        }
    }
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}
