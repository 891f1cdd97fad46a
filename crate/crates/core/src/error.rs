//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SecError {
    /// A node sits on top of the IRS (or the sampler kept producing such
    /// layouts); distances below the pathloss guard are rejected.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("conic solve failed: {0}")]
    Solver(String),

    /// Penalty CCP ran out of restarts without closing the unit-modulus gap.
    #[error("penalty CCP did not converge: {0}")]
    PccpNonConvergence(String),

    #[error("config parse error in {path}: {detail}")]
    ConfigParse { path: String, detail: String },

    #[error("config domain error: key `{key}`: {detail}")]
    ConfigDomain { key: String, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
