use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hexfem::CsrMatrix;

/// Entries beyond which a profile factor is refused (about 1.2 GB).
pub const SKYLINE_ENTRY_LIMIT: usize = 150_000_000;

/// Profile (variable-band) Cholesky factor `A = L Lᵀ` of a symmetric
/// positive definite sparse matrix.
///
/// Row `i` of `L` is stored densely from its first structural nonzero up to
/// the diagonal.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let mut first = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            let (cols, _) = a.row(i);
            let f = cols.iter().copied().filter(|&c| c <= i).min().unwrap_or(i);
            first.push(f);
            start.push(start[i] + i - f + 1);
        }
        let total = start[n];
        if total > SKYLINE_ENTRY_LIMIT {
            return Err(Error::SizeLimit {
                size: total,
                limit: SKYLINE_ENTRY_LIMIT,
            });
        }
        let mut data = vec![0.0; total];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c <= i {
                    data[start[i] + c - first[i]] += v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let lo = fi.max(first[j]);
                let (ri, rj) = (start[i] - fi, start[j] - first[j]);
                let mut s = data[ri + j];
                for p in lo..j {
                    s -= data[ri + p] * data[rj + p];
                }
                data[ri + j] = s / data[rj + j];
            }
            let ri = start[i] - fi;
            let mut d = data[ri + i];
            for p in fi..i {
                d -= data[ri + p] * data[ri + p];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Numerical(format!(
                    "matrix is not positive definite (pivot {i} = {d:.3e})"
                )));
            }
            data[ri + i] = d.sqrt();
        }
        Ok(Self { first, start, data })
    }

    pub fn n(&self) -> usize {
        self.first.len()
    }

    pub fn stored_entries(&self) -> usize {
        self.data.len()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[self.start[i] - self.first[i] + j]
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut s = x[i];
            for j in self.first[i]..i {
                s -= self.entry(i, j) * x[j];
            }
            x[i] = s / self.entry(i, i);
        }
        for i in (0..n).rev() {
            x[i] /= self.entry(i, i);
            let xi = x[i];
            for j in self.first[i]..i {
                x[j] -= self.entry(i, j) * xi;
            }
        }
    }

    /// Solves for every column of `b`.
    pub fn solve_block(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = b.clone();
        out.as_mut_slice()
            .par_chunks_mut(b.nrows().max(1))
            .for_each(|col| self.solve_in_place(col));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::linalg::random_block;

    #[test]
    fn solves_random_banded_spd() {
        let n = 40;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 4.0 + i as f64 * 0.01;
            for d in [1usize, 5] {
                if i + d < n {
                    a[(i, i + d)] = -1.0;
                    a[(i + d, i)] = -1.0;
                }
            }
        }
        let f = SkylineCholesky::factor(&CsrMatrix::from_dense(&a)).unwrap();
        let b = random_block(n, 3, 1);
        let x = f.solve_block(&b);
        assert!((&a * x - b).amax() < 1e-12);
        assert!(f.stored_entries() < n * n);
    }

    #[test]
    fn rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(SkylineCholesky::factor(&CsrMatrix::from_dense(&a)).is_err());
    }
}
