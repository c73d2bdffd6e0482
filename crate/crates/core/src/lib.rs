//! Adaptive-subspace self-organizing maps (ASSOM) and the subspace-based
//! minority oversampler built on top of them.
//!
//! The crate is organised bottom-up:
//!
//! - [`subspace`]: orthonormal bases, projection, residuals and projectors.
//! - [`network`]: the ASSOM itself (competition, kernel, basis updates,
//!   dissipation, training loop) and its JSON document format.
//! - [`oversampler`]: synthetic minority generation through every module's
//!   subspace.
//! - [`datasets`]: CSV/KEEL loading, binarization, stratified splits and
//!   z-score normalization.
//! - [`eval`]: confusion counts, the four imbalance metrics, the k-NN harness
//!   classifier, the SMOTE baseline and average-rank tables.
//! - [`experiment`]: the configurable before/after comparison runner.
//!
//! Data-parallel loops go through [`Execution`]; with the `parallel` feature
//! disabled every loop runs sequentially and produces identical output.

pub mod datasets;
pub mod eval;
pub mod experiment;
pub mod network;
pub mod oversampler;
pub mod subspace;

mod error;
mod exec;
mod seed;

pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
pub use seed::{derive_seed, seeded_rng};

/// Version string written into every report and network document.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
