//! Basin-scale hydropower planning: river network model, hydrology,
//! parametric engineering and costing of candidate projects, screening, impact
//! metrics, and a branch-and-bound portfolio optimizer.
//!
//! Numeric kernels are generic over [`Scalar`]; the planning model is stored
//! in [`Real`].

// `!(x > 0.0)` is how inputs reject NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basin;
pub mod engineering;
pub mod hydrology;
pub mod lp;
pub mod metrics;
pub mod optimizer;
pub mod pipeline;
pub mod scalar;
pub mod screening;
pub mod synthetic;

pub use scalar::{rel_close, Scalar};

/// Scalar used by the planning model.
pub type Real = f64;

/// Linear program over the model scalar.
pub type Lp = lp::LinearProgram<Real>;
/// Single-precision linear program.
pub type Lp32 = lp::LinearProgram<f32>;
pub type LpSolution = lp::LpSolution<Real>;
