//! Forget-set-only machine unlearning on a small differentiable classifier.
//!
//! The crate provides the full pipeline at desk scale: a dense softmax
//! classifier with exact parameter and input gradients ([`model`]), targeted
//! PGD adversarial surrogate generation ([`attacks`]), the unlearning
//! strategies and their combined objective ([`unlearning`]), a synthetic
//! speaker-grouped benchmark with CSV interchange ([`data`]), and
//! UAR/confusion/z-test evaluation ([`metrics`]).
//!
//! Data-parallel inner loops (attack generation, per-sample gradients,
//! evaluation) run on rayon when the default `parallel` feature is enabled
//! and on plain iterators otherwise; outputs are bit-identical either way
//! because every reduction folds in a fixed order.

pub mod attacks;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod parallel;
pub mod rng;
pub mod unlearning;

pub use error::{Error, Result};
