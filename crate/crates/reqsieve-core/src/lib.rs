//! Core algorithms for anomaly detection on HTTP request traffic.
//!
//! The crate covers the full modelling chain, free of any IO:
//!
//! - [`request`]: the raw request record and corpus container
//! - [`preprocess`]: percent/UTF-8 decoding and lowercase canonicalization
//! - [`tokenizer`]: whitespace tokenization and token dictionaries
//! - [`vectorizer`]: bag-of-words and TF-IDF sparse vectors
//! - [`feature_select`]: mutual-information ranking of dictionary tokens
//! - [`ocsvm`]: a ν-one-class SVM with RBF kernel, trained by SMO
//! - [`evaluate`]: confusion counts, ROC/AUC, F̂ model selection, grid search
//!
//! The crate is `no_std` (with `alloc`) so the scoring path can be embedded;
//! file formats, corpus loaders and the CLI live in the companion `reqsieve`
//! crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod evaluate;
pub mod feature_select;
pub mod ocsvm;
pub mod preprocess;
pub mod request;
pub mod tokenizer;
pub mod vectorizer;

pub use error::{Error, Result};
pub use request::{ClassLabel, Corpus, RawRequest};
