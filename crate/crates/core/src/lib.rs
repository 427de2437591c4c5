#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod tensor;
pub mod types;

pub use error::{Error, Result};
pub use exec::Exec;
pub mod config;
pub mod data;
pub mod harness;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod train;
