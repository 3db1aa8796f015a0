// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ekf_baseline;
pub mod error;
pub mod factors;
pub mod geom2d;
pub mod harness;
pub mod pushing_physics;
pub mod sensor_sim;
pub mod smoother;

pub use error::{Error, Result};
