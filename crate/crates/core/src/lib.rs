//! Backward-adaptive lossy compression by natural type selection.
//!
//! The crate is organised bottom-up:
//!
//! - [`prob`]: finite-alphabet distributions, entropy, divergence and types.
//! - [`rd`]: Blahut-Arimoto rate-distortion solver (fixed slope and fixed
//!   distortion), mismatched rates and convergence diagnostics.
//! - [`codebook`]: sampling laws for random codewords.
//! - [`rng`]: the counter-based stream every random draw flows from.
//! - [`nts`]: the encoder/decoder loop that learns the codebook distribution
//!   from its own matched codewords.
//!
//! All information quantities are in bits.

pub mod codebook;
pub mod nts;
pub mod prob;
pub mod rd;
pub mod rng;

pub use codebook::{AnnealSchedule, CodebookModel, CodewordSampler, ModelKind};
pub use prob::{Distribution, ProbError, TypeDistribution};
pub use rd::{DistortionMeasure, RdError, RdPoint, SolveStatus};
pub use rng::Stream;
