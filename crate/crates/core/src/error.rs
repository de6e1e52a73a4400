//! Crate-wide error type.
//!
//! Variants are grouped by how the CLI maps them to exit codes: [`Error::Io`]
//! exits with 2, everything else (malformed input, invariant violations,
//! degenerate geometry) exits with 1.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed CSV/JSON syntax. `location` is a line/record position when known.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// A required field is absent from a record.
    #[error("record {record}: missing required field `{field}`")]
    MissingField { record: String, field: &'static str },

    /// A record violates a domain invariant.
    #[error("record {record}: {message}")]
    Validation { record: String, message: String },

    /// Two manifest records share the same image id.
    #[error("duplicate image_id `{0}` in manifest")]
    DuplicateImageId(String),

    /// A detection references an image id absent from the manifest.
    #[error("detection {index} references unknown image_id `{image_id}`")]
    OrphanDetection { index: usize, image_id: String },

    /// A coordinate or offset is outside the supported range.
    #[error("out of range: {0}")]
    Range(String),

    /// Geometry that the projection model cannot handle (e.g. tree height
    /// at or above flight altitude).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// A simulation scenario is internally inconsistent.
    #[error("invalid scenario: {0}")]
    Scenario(String),

    /// A statistic was requested over an empty sample.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Bad pipeline configuration.
    #[error("invalid config: {0}")]
    Config(String),

    /// I/O failure, with the path that triggered it.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Attach path context to a raw I/O error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
