//! Structured state-space models of passive reciprocal networks, Riccati
//! solvers and closed-form H2 / H∞ controller synthesis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod generators;
pub mod internal_map;
pub mod linalg;
pub mod netgraph;
pub mod plant;
pub mod riccati;
pub mod serialization;
pub mod sim;
pub mod structured;
pub mod synthesis;

pub use error::{Error, ErrorClass, Result};
