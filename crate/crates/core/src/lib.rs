//! Fractional kernels, nonlocal mean curvature and improvement-of-flatness
//! diagnostics for hypersurfaces in ℝⁿ with a near-Euclidean metric.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flatness;
pub mod geometry;
pub mod harness;
pub mod heat;
pub mod kernel;
pub mod nmc;
pub mod quad;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
