// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branching;
pub mod error;
pub mod fmoment;
pub mod levy_env;
pub mod measure;
pub mod moments;
pub mod quadrature;
pub mod scenario;
pub mod simulate;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
