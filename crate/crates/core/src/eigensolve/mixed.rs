use std::fmt;
use std::time::Instant;

use nalgebra::DMatrix;

use super::krylov::{krylov_warmstart, KrylovConfig};
use super::linalg::random_block;
use super::lobpcg::{lobpcg, LobpcgOptions};
use super::ritz::rayleigh_ritz;
use super::svqb::SubspaceBasis;
use super::{ModeSet, SolveReport};
use crate::error::{Error, Result};
use crate::hexfem::{rigid_body_modes, AssembledSystem};

/// Source of the starting subspace for [`mixed_solve`].
#[derive(Debug, Clone, PartialEq)]
pub enum WarmStart {
    Random,
    Krylov { modes: usize, depth: usize },
    /// Vectors supplied from outside, one column per approximate mode.
    External(DMatrix<f64>),
}

impl fmt::Display for WarmStart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WarmStart::Random => write!(f, "random"),
            WarmStart::Krylov { modes, depth } => write!(f, "krylov({modes},{depth})"),
            WarmStart::External(v) => write!(f, "external({})", v.ncols()),
        }
    }
}

/// Warm-started vibration solve.
///
/// The provider subspace is supplemented with the body's rigid motions and
/// raw random vectors, cleaned with SVQB, projected by Rayleigh–Ritz, and
/// the lowest block of Ritz vectors seeds LOBPCG. Providers therefore only
/// need to supply the audible modes. The random provider skips the
/// supplement and is plain LOBPCG from a random block.
pub fn mixed_solve(sys: &AssembledSystem, warm: &WarmStart, opts: &LobpcgOptions) -> Result<(ModeSet, SolveReport)> {
    let start = Instant::now();
    let n = sys.ndof();
    let block = opts.modes + opts.rigid_buffer + opts.guard;
    let provided = match warm {
        WarmStart::Random => None,
        WarmStart::Krylov { modes, depth } => {
            let cfg = KrylovConfig { modes: *modes, depth: *depth, seed: opts.seed };
            Some(krylov_warmstart(&sys.k, &sys.m, cfg)?.vectors)
        }
        WarmStart::External(v) => {
            if v.nrows() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: v.nrows() });
            }
            Some(v.clone())
        }
    };
    let random = random_block(n, block, opts.seed);
    let x0 = match provided {
        None => SubspaceBasis::raw(random),
        Some(p) => {
            let rigid = rigid_body_modes(&sys.grid);
            let (np, nr) = (p.ncols(), rigid.ncols());
            let mut s = DMatrix::zeros(n, np + nr + block);
            s.columns_mut(0, np).copy_from(&p);
            s.columns_mut(np, nr).copy_from(&rigid);
            s.columns_mut(np + nr, block).copy_from(&random);
            let rr = rayleigh_ritz(&SubspaceBasis::raw(s), &sys.k, &sys.m)?;
            let take = block.min(rr.values.len());
            SubspaceBasis {
                vectors: rr.vectors.columns(0, take).into_owned(),
                m_orthonormal: true,
            }
        }
    };
    let setup = start.elapsed().as_secs_f64();
    let (modes, mut report) = lobpcg(sys, &x0, opts)?;
    report.elapsed_history.iter_mut().for_each(|t| *t += setup);
    report.provenance = warm.to_string();
    report.wall_time = start.elapsed();
    Ok((modes, report))
}
