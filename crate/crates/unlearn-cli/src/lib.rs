//! Experiment harness for forget-set-only machine unlearning.
//!
//! Four commands reproduce the full protocol on the synthetic benchmark (or
//! any dataset in the interchange CSV format):
//!
//! - `pretrain`: train the classifier and persist a model artifact.
//! - `unlearn`: run one unlearning strategy against a pretrained artifact.
//! - `sweep`: the tau x N x strategy x seed grid, aggregated to CSV.
//! - `report`: render the comparison table with significance stars.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod report;
