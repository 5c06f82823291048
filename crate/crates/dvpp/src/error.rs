use thiserror::Error;

use crate::scenario::ScenarioError;

#[derive(Debug, Error)]
pub enum DvppError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("model error: {0}")]
    Model(#[from] dvpp_core::Error),
    #[error("no forming device present after {0}")]
    NoFormingDevice(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl DvppError {
    /// Process exit status: 2 for bad input files, 3 for anything that fails while simulating.
    pub fn exit_code(&self) -> i32 {
        match self {
            DvppError::Scenario(_) | DvppError::Unsupported(_) => 2,
            _ => 3,
        }
    }
}
