//! Error type shared across the pipeline.

use std::path::PathBuf;
use thiserror::Error;

/// Errors reported by the recording parser, feature extractors, model
/// fitting, and the evaluation harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates an operation precondition.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A recording, manifest, or model file does not match its format.
    #[error("format error: {0}")]
    Format(String),

    /// Underlying I/O failure, with the path that triggered it.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Training data carries no usable variance.
    #[error("degenerate training set: {0}")]
    Degenerate(String),

    /// Mean core temperature fell below the configured floor; the
    /// power-per-temperature division would be meaningless.
    #[error("temperature underflow: mean core temperature {mean} below floor {floor}")]
    TemperatureUnderflow { mean: f64, floor: f64 },

    /// Dimension or rate mismatch between two artifacts (e.g. model vs
    /// recording).
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Dataset/fold configuration problem.
    #[error("configuration error: {0}")]
    Config(String),

    /// A likelihood evaluated to NaN or infinity during a posterior update.
    #[error("material {material}: {modality} likelihood is not finite")]
    NonFiniteLikelihood {
        material: String,
        modality: &'static str,
    },
}

impl Error {
    /// Wrap an I/O error with the offending path.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
