use thiserror::Error;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// A library error tagged with the pipeline stage that raised it.
#[derive(Debug, Error)]
#[error("{stage}: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: modalvox::Error,
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        if self.source.is_numerical() {
            EXIT_NUMERICAL
        } else {
            EXIT_INPUT
        }
    }
}

pub type Result<T> = std::result::Result<T, StageError>;

/// Attaches a stage name to library results.
pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<modalvox::Error>> Stage<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| StageError { stage, source: e.into() })
    }
}
