//! Nonlinear tensor sufficient dimension reduction for matrix-valued predictors.
//!
//! Each predictor `X` is mapped through its sign-normalized SVD to factor vectors
//! `(U_i, V_i)`; sufficient predictors take the form `Σ_i f(U_i) g(V_i)` with `f`, `g`
//! in Gaussian RKHSs. Tucker and CP forms are provided, with GCV tuning, a GSIR
//! baseline, distance-correlation metrics and a simulation harness.

pub mod baseline;
pub mod bench;
pub mod cp;
pub mod error;
pub mod feature;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod link;
pub mod metrics;
pub mod model;
pub mod operator;
pub mod simgen;
pub mod tucker;
pub mod tuning;

pub use error::{NtsdrError, Result};
