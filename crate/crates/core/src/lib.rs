// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod error;
pub mod expr;
pub mod model;
pub mod par;

pub use error::{Error, Result};
pub mod boundary;
pub mod goursat;
pub mod reconstruct;
pub mod singular;
pub mod perturb;
pub mod relabel;
pub mod sweep;
