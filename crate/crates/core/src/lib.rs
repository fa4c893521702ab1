//! Track reconstruction by annealing a QUBO over candidate hit pairs.
//!
//! The chain runs event -> sectors -> KDE-filtered candidate edges ->
//! sub-graphs -> per-sub-graph QUBO -> simulated annealing -> track
//! assembly -> metrics. Each stage lives in its own module and can be
//! driven separately or through [`pipeline`].

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anneal;
pub mod error;
pub mod event;
pub mod pipeline;
pub mod preprocess;
pub mod qubo;
pub mod tracking;

pub use error::{Error, Result};
