//! Visual-servoing NMPC for deformable polygonal targets.
//!
//! The controlled state is a moment-like summary of the target contour on
//! the normalized image plane: centroid, log-area and the tangent of a
//! reference direction. The crate provides the camera model, the state and
//! its dynamics, barrier terms, the receding-horizon controller with its
//! diagnostics, a closed-loop simulator and the statistics used to judge runs.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod barrier;
pub mod camera;
pub mod error;
pub mod nmpc;
pub mod polygon;
pub mod sim;
pub mod target;

pub use error::{Error, Result};
