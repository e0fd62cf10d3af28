//! Compressed sparse row storage and the `.spmat` exchange format.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{f64s_to_le, le_to_f64s, read_container, write_container};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix with a given sorted pattern and zero values.
    pub fn from_pattern(row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Self {
        let n = row_ptr.len() - 1;
        let nnz = col_idx.len();
        Self {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn from_parts(row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if row_ptr.is_empty() || *row_ptr.last().unwrap() != col_idx.len() || col_idx.len() != values.len()
        {
            return Err(Error::Format("inconsistent CSR arrays".into()));
        }
        let n = row_ptr.len() - 1;
        for r in 0..n {
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= n) {
                return Err(Error::Format(format!("row {r} has unsorted or out-of-range columns")));
            }
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in 0..n {
            for c in 0..n {
                if a[(r, c)] != 0.0 {
                    col_idx.push(c);
                    values.push(a[(r, c)]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Adds `v` at `(r, c)`; the entry must be in the pattern.
    pub(crate) fn add_at(&mut self, r: usize, c: usize, v: f64) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        let pos = self.col_idx[span.clone()]
            .binary_search(&c)
            .expect("entry outside sparsity pattern");
        self.values[span.start + pos] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|p| vals[p]).unwrap_or(0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    /// `self + s * other` for matrices sharing one pattern.
    pub fn add_scaled(&self, s: f64, other: &CsrMatrix) -> Result<Self> {
        if self.row_ptr != other.row_ptr || self.col_idx != other.col_idx {
            return Err(Error::InvalidInput("sparsity patterns differ".into()));
        }
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
            ..self.clone()
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (r, out) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *out = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `A X` for a dense block, one column at a time.
    pub fn mul_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.n);
        let mut y = DMatrix::zeros(self.n, x.ncols());
        y.as_mut_slice()
            .par_chunks_mut(self.n.max(1))
            .zip(x.as_slice().par_chunks(self.n.max(1)))
            .for_each(|(yc, xc)| self.mul_vec_into(xc, yc));
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                a[(r, c)] = v;
            }
        }
        a
    }

    /// Largest `|a_rc - a_cr|` relative to the largest `|a_rc|`.
    pub fn asymmetry(&self) -> f64 {
        let mut max_diff: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                max_abs = max_abs.max(v.abs());
                max_diff = max_diff.max((v - self.get(c, r)).abs());
            }
        }
        if max_abs == 0.0 {
            0.0
        } else {
            max_diff / max_abs
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpmatHeader {
    pub n: usize,
    pub nnz: usize,
    pub symmetric: bool,
}

/// Writes `.spmat`: header line, then `row_ptr` (u64, n+1), `col_idx`
/// (u64, nnz) and `values` (f64, nnz), all little-endian.
pub fn write_spmat<W: Write>(w: W, a: &CsrMatrix) -> Result<()> {
    let header = SpmatHeader {
        n: a.n,
        nnz: a.nnz(),
        symmetric: true,
    };
    let mut payload = Vec::with_capacity(8 * (a.n + 1 + 2 * a.nnz()));
    for &p in &a.row_ptr {
        payload.extend_from_slice(&(p as u64).to_le_bytes());
    }
    for &c in &a.col_idx {
        payload.extend_from_slice(&(c as u64).to_le_bytes());
    }
    f64s_to_le(&a.values, &mut payload);
    write_container(w, &header, &payload)
}

pub fn read_spmat<R: BufRead>(r: R) -> Result<CsrMatrix> {
    let (h, payload): (SpmatHeader, Vec<u8>) = read_container(r)?;
    let ints = 8 * (h.n + 1 + h.nnz);
    if payload.len() != ints + 8 * h.nnz {
        return Err(Error::Format("spmat payload size mismatch".into()));
    }
    let u64s: Vec<usize> = payload[..ints]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let values = le_to_f64s(&payload[ints..], h.nnz)?;
    CsrMatrix::from_parts(u64s[..h.n + 1].to_vec(), u64s[h.n + 1..].to_vec(), values)
}
