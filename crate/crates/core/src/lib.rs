//! Discrete-time interest-rate models driven by a pricing kernel on a finite
//! event tree.
//!
//! The crate builds kernels (rational, from an increasing process, or
//! explicit), derives the money-market account, discount-bond surfaces and
//! Flesaker-Hughston families, prices dividend-paying assets, and checks
//! every structural identity node by node.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assets;
pub mod bonds;
pub mod cli;
pub mod error;
pub mod filtration;
pub mod io;
pub mod kernel;
pub mod models;

pub use error::{Error, Result};
pub use filtration::{AdaptedProcess, CheckReport, FiltrationTree, NodeRef};
pub use kernel::PricingKernel;
