//! Voxel-based modal sound synthesis.
//!
//! The pipeline runs from a hexahedral occupancy grid ([`voxgrid`]) through
//! finite-element assembly ([`hexfem`]), a warm-started generalized
//! eigensolver ([`eigensolve`]), boundary-element acoustic transfer
//! ([`radiation`]) compressed into far-field transfer maps ([`ffat`]), to an
//! impulse-driven modal synthesizer ([`synth`]). [`convequiv`] shows the
//! exact correspondence between assembled matrix-vector products and
//! 3×3×3 sparse convolutions.

pub mod convequiv;
pub mod eigensolve;
pub mod error;
pub mod ffat;
pub mod hexfem;
pub mod io;
pub mod radiation;
pub mod shapes;
pub mod synth;
pub mod voxgrid;

pub use error::{Error, Result};
pub use voxgrid::{SurfaceExposure, TriMesh, VoxelGrid};
