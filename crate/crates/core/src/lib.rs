//! A desk-scale laboratory for the emergence and transience of in-context
//! learning (ICL) versus in-weights learning (IWL) in small transformers.
//!
//! The crate is organized around the experiment pipeline:
//!
//! - [`episodes`] — exemplar libraries and every sequence family used for
//!   training and evaluation, with exactly reproducible randomness.
//! - [`embedcluster`] — turns a token-embedding matrix into an exemplar
//!   library via subselection, spherical k-means, and furthest-point picks.
//! - [`nanoformer`] — the compact transformer with exact analytic gradients.
//! - [`optimstack`] — Adam, the warmup/inverse-sqrt schedule, and selective
//!   L2 regularization over named parameter groups.
//! - [`trainer`] — the training loop, evaluator suite, baseline predictors,
//!   checkpointing, and CSV metric logging.
//! - [`curves`] — peak height, peak onset, decay slope, and the transience
//!   verdict derived from logged metric series.
//! - [`cli`] — subcommands, config files, and SVG plotting.

pub mod cli;
pub mod curves;
pub mod embedcluster;
pub mod episodes;
pub mod nanoformer;
pub mod optimstack;
pub mod rng;
pub mod trainer;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's preconditions.
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    /// Bad run configuration (unknown keys, inconsistent settings).
    #[error("config error: {0}")]
    Config(String),
    /// A file did not match its declared format.
    #[error("format error: {0}")]
    Format(String),
    /// Non-finite values inside a computation; names the first offender.
    #[error("non-finite value in {0}")]
    NonFinite(String),
    /// Training produced a non-finite loss and was aborted.
    #[error("diverged at step {step}: {detail}")]
    Diverged { step: u64, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 divergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArg(_) | Error::Config(_) | Error::Format(_) => 2,
            Error::NonFinite(_) | Error::Diverged { .. } => 3,
            Error::Io(_) => 4,
        }
    }
}
