//! Homogenization driver: run configuration, pipeline and report files.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod units;

pub use config::{RunConfig, RunSpec};
pub use error::{AppError, ConfigError, Result};
pub use pipeline::{Coefficients, Mode, Model, Outcome};
