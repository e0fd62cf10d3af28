//! Pipeline orchestration and benchmark harness behind the `modalvox`
//! command-line tool.

pub mod bench;
pub mod error;
pub mod pipeline;

pub use error::{Result, Stage, StageError};
