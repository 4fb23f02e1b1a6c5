//! Metaheuristic hyperparameter optimization and feature selection.
//!
//! The crate bundles the pieces needed to tune a small neural classifier on
//! subject-structured data without identity leakage:
//!
//! - [`search_space`]: mixed continuous/integer/categorical spaces encoded as
//!   vectors in the unit box.
//! - [`pso`], [`ga`], [`hybrid`]: population optimizers with an ask/tell
//!   interface, and the two-stage GA→PSO combination.
//! - [`multifidelity`]: successive halving and Hyperband.
//! - [`objective`]: the feed-forward classifier used as the black-box
//!   objective, its losses, and analytic benchmark functions.
//! - [`evaluation`]: subject-wise CV plans, binary metrics, AUC, and paired
//!   significance tests.
//! - [`dataset`]: CSV ingestion, normalization, SMOTE, class weights and the
//!   synthetic generator.
//! - [`runner`]: experiment configuration, the parallel executor with
//!   checkpoint caching, trial logging and run comparison.
//!
//! All optimizers minimize. Scores that should be maximized (F1, AUC) are
//! negated by the objective layer.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod ga;
pub mod hybrid;
pub mod multifidelity;
pub mod objective;
pub mod optimizer;
pub mod pso;
pub mod runner;
pub mod search_space;
mod seed;

pub use error::{Error, Result};
pub use seed::derive_seed;
