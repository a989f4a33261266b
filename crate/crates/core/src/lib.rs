//! Cross-modal association rule mining.
//!
//! Pooled CNN activations and story annotations are turned into integer
//! transactions ([`transactions`]), mined with FP-Growth ([`miner`]), reduced
//! to vision-to-word rules ([`rules`]) and applied to unseen images
//! ([`inference`]). [`eval`] scores inferred concepts against reference
//! annotations and [`cli`] drives the whole pipeline from the command line.

pub mod cli;
pub mod error;
pub mod eval;
pub mod inference;
pub mod ingest;
pub mod miner;
pub mod rules;
pub mod synthetic;
pub mod transactions;

pub use error::{Error, Result};
