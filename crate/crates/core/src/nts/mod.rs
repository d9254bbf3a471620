//! Natural type selection: a backward-adaptive lossy coder.
//!
//! Each generation the encoder scans a fresh random codebook for the first
//! codeword within average distortion `D` of the source word and sends its
//! index (Elias gamma). Encoder and decoder then both move the codebook
//! distribution toward the type of that codeword. The decoder only ever sees
//! indices, so it reproduces the encoder's state bit for bit.

mod config;
mod learning;
mod search;
mod session;
mod trace;

pub use config::{ModelSpec, NtsConfig, UpdatePolicy};
pub use learning::{learning_update, BlockHistory};
pub use search::{codeword_at, d_match_search, index_code_length, MatchResult};
pub use session::{run_session, CodecState, Decoder, Encoded, Encoder};
pub use trace::{format_float, format_sig, GenerationRecord, SessionTrace, TRACE_HEADER};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NtsError {
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error(transparent)]
    Prob(#[from] crate::prob::ProbError),
    #[error(transparent)]
    Rd(#[from] crate::rd::RdError),
    #[error(transparent)]
    Codebook(#[from] crate::codebook::CodebookError),
    #[error("index {index} outside 1..={max}: corrupted stream")]
    StreamCorruption { index: u64, max: u64 },
    #[error("encoder/decoder desynchronized at generation {generation}: {detail}")]
    SyncFailure { generation: u64, detail: String },
}
