#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod assembly;
pub mod constitutive;
pub mod error;
pub mod geometry;
pub mod layout;
pub mod material;
pub mod post;
pub mod math;
pub mod solver;
pub mod sparse;
pub mod spline;

pub use error::{Error, Result};
