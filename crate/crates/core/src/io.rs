//! Shared framing for the binary artifact files: one line of JSON header
//! terminated by `\n`, followed by a raw little-endian payload.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn write_container<W: Write, H: Serialize>(mut w: W, header: &H, payload: &[u8]) -> Result<()> {
    let line = serde_json::to_string(header)?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

pub fn read_container<R: BufRead, H: DeserializeOwned>(mut r: R) -> Result<(H, Vec<u8>)> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(Error::Format("missing header line".into()));
    }
    let header = serde_json::from_str(line.trim_end_matches('\n'))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    Ok((header, payload))
}

pub(crate) fn f64s_to_le(values: &[f64], out: &mut Vec<u8>) {
    out.reserve(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn le_to_f64s(bytes: &[u8], count: usize) -> Result<Vec<f64>> {
    if bytes.len() < count * 8 {
        return Err(Error::Format(format!(
            "payload holds {} bytes, expected at least {}",
            bytes.len(),
            count * 8
        )));
    }
    Ok(bytes[..count * 8]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub(crate) fn le_to_u32s(bytes: &[u8], count: usize) -> Result<Vec<u32>> {
    if bytes.len() != count * 4 {
        return Err(Error::Format(format!(
            "payload holds {} bytes, expected {}",
            bytes.len(),
            count * 4
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
