//! Spatial crowdsourcing task assignment with demand forecasting,
//! dependency-tree partitioning and value-guided search.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ddgnn;
pub mod depgraph;
pub mod engine;
pub mod error;
pub mod grid;
pub mod harness;
pub mod model;
pub mod search;
pub mod seqplan;
pub mod tensor_file;

pub use error::{Error, Result};
