use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ModeSet;
use crate::error::{Error, Result};
use crate::io::{f64s_to_le, le_to_f64s, read_container, write_container};

/// Header of a `.modes` file. The payload holds `k` eigenvalues, the
/// `ndof × k` eigenvectors column-major, then `k` residuals, all f64 LE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModesHeader {
    pub k: usize,
    pub ndof: usize,
    pub material: String,
    pub h: f64,
    pub seed: u64,
    pub solver: String,
    pub tol: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
}

pub fn write_modes<W: Write>(w: W, header: &ModesHeader, modes: &ModeSet) -> Result<()> {
    if header.k != modes.len() || header.ndof != modes.ndof() {
        return Err(Error::InvalidInput(format!(
            "header says {}×{} but the mode set is {}×{}",
            header.ndof,
            header.k,
            modes.ndof(),
            modes.len()
        )));
    }
    let mut payload = Vec::new();
    f64s_to_le(&modes.lambdas, &mut payload);
    f64s_to_le(modes.vectors.as_slice(), &mut payload);
    f64s_to_le(&modes.residuals, &mut payload);
    write_container(w, header, &payload)
}

pub fn read_modes<R: BufRead>(r: R) -> Result<(ModesHeader, ModeSet)> {
    let (header, payload): (ModesHeader, _) = read_container(r)?;
    let (k, n) = (header.k, header.ndof);
    let count = k + n * k + k;
    if payload.len() != 8 * count {
        return Err(Error::Format(format!(
            "mode payload holds {} bytes, expected {}",
            payload.len(),
            8 * count
        )));
    }
    let values = le_to_f64s(&payload, count)?;
    let lambdas = values[..k].to_vec();
    let vectors = DMatrix::from_column_slice(n, k, &values[k..k + n * k]);
    let residuals = values[k + n * k..].to_vec();
    let modes = ModeSet::new(lambdas, vectors, residuals, header.alpha, header.beta);
    Ok((header, modes))
}

/// Writes approximate mode shapes in the `.modes` layout so an external
/// predictor can hand them to the solver.
pub fn write_warmstart<W: Write>(w: W, vectors: &DMatrix<f64>) -> Result<()> {
    let k = vectors.ncols();
    let header = ModesHeader {
        k,
        ndof: vectors.nrows(),
        material: String::new(),
        h: 0.0,
        seed: 0,
        solver: "external".into(),
        tol: 0.0,
        alpha: 0.0,
        beta: 0.0,
    };
    let modes = ModeSet::new(vec![0.0; k], vectors.clone(), vec![0.0; k], 0.0, 0.0);
    write_modes(w, &header, &modes)
}

/// Reads the vectors of a `.modes` or warm-start file.
pub fn read_warmstart<R: BufRead>(r: R) -> Result<DMatrix<f64>> {
    Ok(read_modes(r)?.1.vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::linalg::random_block;

    fn header(k: usize, ndof: usize) -> ModesHeader {
        ModesHeader {
            k,
            ndof,
            material: "glass".into(),
            h: 0.005,
            seed: 7,
            solver: "krylov(20,1)".into(),
            tol: 1e-6,
            alpha: 1.0,
            beta: 1e-7,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let v = random_block(12, 3, 1);
        let modes = ModeSet::new(vec![1.5e6, 2.25e6, 9.0e6], v, vec![1e-9, 2e-9, 3e-9], 1.0, 1e-7);
        let mut buf = Vec::new();
        write_modes(&mut buf, &header(3, 12), &modes).unwrap();
        let (h, back) = read_modes(buf.as_slice()).unwrap();
        assert_eq!(h, header(3, 12));
        assert_eq!(back, modes);
    }

    #[test]
    fn warmstart_exchange() {
        let v = random_block(9, 2, 4);
        let mut buf = Vec::new();
        write_warmstart(&mut buf, &v).unwrap();
        assert_eq!(read_warmstart(buf.as_slice()).unwrap(), v);
    }

    #[test]
    fn truncated_payload_rejected() {
        let modes = ModeSet::new(vec![1.0], random_block(6, 1, 0), vec![0.0], 0.0, 0.0);
        let mut buf = Vec::new();
        write_modes(&mut buf, &header(1, 6), &modes).unwrap();
        buf.truncate(buf.len() - 8);
        assert!(read_modes(buf.as_slice()).is_err());
    }

    #[test]
    fn header_mismatch_rejected() {
        let modes = ModeSet::new(vec![1.0], random_block(6, 1, 0), vec![0.0], 0.0, 0.0);
        assert!(write_modes(Vec::new(), &header(2, 6), &modes).is_err());
    }
}
