//! Pipeline, file formats and corpus tooling around `reqsieve-core`.
//!
//! The core crate holds the algorithms; this crate adds what a deployment
//! needs: JSONL/CSV corpus loaders, persisted artifacts (token dictionary,
//! feature ranking, model file, ROC and metrics reports), a synthetic corpus
//! generator for tests and desk-scale experiments, and the end-to-end
//! pipeline driven by the `reqsieve` binary.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod escape;
pub mod model;
pub mod pipeline;
pub mod synthgen;

mod error;

pub use error::{Error, Result};
pub use model::DetectorModel;
