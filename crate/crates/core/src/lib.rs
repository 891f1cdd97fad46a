//! Two-phase IRS-aided secure SWIPT toolkit.
//!
//! A base station multicasts to helper users in the null space of the
//! attacked user's channel; the helpers forward the decoded signal to that
//! user through an intelligent reflecting surface, powered by energy
//! harvested in the first phase. The crate covers both eavesdropper models:
//!
//! * [`robust`] — outage-constrained secrecy-rate maximization under
//!   statistical cascaded-CSI errors (active eavesdropper), built on
//!   Bernstein-type-inequality safe approximations and a penalty
//!   convex-concave procedure for the reflection coefficients.
//! * [`passive`] — average-secrecy-rate maximization against a passive
//!   eavesdropper hiding on the BS-user segment, via an ergodic
//!   eavesdropper correlation matrix, MM surrogates and closed-form
//!   reflection updates with price bisection.
//!
//! Supporting layers: [`channel`] (geometry, Rician fading, cascaded IRS
//! channels, CSI error model), [`rates`] (rate expressions and bounds),
//! [`conic`] (a small conic-programming layer with an interior-point
//! backend), and [`harness`] (seeded Monte Carlo experiments with CSV/JSON
//! output).

// Forces the system BLAS link that the PSD cone backend needs.
use openblas_src as _;

pub mod channel;
pub mod conic;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod passive;
pub mod rates;
pub mod robust;

pub use channel::{
    ChannelSet, CsiErrorModel, IrsOffsets, NoisePowers, Polar, SystemConfig, Topology,
};
pub use conic::{Cone, ConeProgram, ConeSolution, SolveStatus};
pub use error::SecError;
pub use harness::{ExperimentSpec, Mode, OutputFormat, ResultRow, SweepSpec};
pub use passive::{PassiveSolution, QuadraticPair};
pub use rates::ErgodicEveStats;
pub use robust::{ActiveSolution, BtiTerms, EstimatedChannels, PccpParams};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dynamically sized complex vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dynamically sized complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
