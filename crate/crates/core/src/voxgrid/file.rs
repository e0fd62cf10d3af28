//! `.vgrid` files: a JSON header line followed by the occupied coordinates
//! as little-endian `u32` triplets `(x, y, z)`, sorted lexicographically.

use std::io::{BufRead, Write};

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::VoxelGrid;
use crate::error::{Error, Result};
use crate::io::{le_to_u32s, read_container, write_container};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VgridHeader {
    pub dims: [u32; 3],
    pub h: f64,
    pub count: usize,
    pub corner_order: String,
    #[serde(default)]
    pub origin: [f64; 3],
    /// `raw` (default) or `base64`.
    #[serde(default = "raw")]
    pub encoding: String,
}

fn raw() -> String {
    "raw".to_string()
}

pub fn write_vgrid<W: Write>(w: W, g: &VoxelGrid) -> Result<()> {
    let header = VgridHeader {
        dims: g.dims(),
        h: g.h(),
        count: g.num_voxels(),
        corner_order: "zyx".into(),
        origin: g.origin(),
        encoding: raw(),
    };
    let mut payload = Vec::with_capacity(12 * g.num_voxels());
    for u in g.voxels() {
        for c in u {
            payload.extend_from_slice(&c.to_le_bytes());
        }
    }
    write_container(w, &header, &payload)
}

pub fn read_vgrid<R: BufRead>(r: R) -> Result<VoxelGrid> {
    let (header, payload): (VgridHeader, Vec<u8>) = read_container(r)?;
    if header.corner_order != "zyx" {
        return Err(Error::Format(format!(
            "unsupported corner order `{}`",
            header.corner_order
        )));
    }
    let bytes = match header.encoding.as_str() {
        "raw" => payload,
        "base64" => base64::engine::general_purpose::STANDARD
            .decode(payload.trim_ascii())
            .map_err(|e| Error::Format(format!("bad base64 payload: {e}")))?,
        other => return Err(Error::Format(format!("unknown encoding `{other}`"))),
    };
    let flat = le_to_u32s(&bytes, 3 * header.count)?;
    let voxels: Vec<[u32; 3]> = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    if voxels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Format("voxel list is not in canonical sorted order".into()));
    }
    VoxelGrid::new(header.dims, header.h, header.origin, voxels)
}
