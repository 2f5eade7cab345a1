//! Numerical core for a nonlocal delayed reaction-diffusion model of tumor
//! growth under therapy on `[0, pi]`.
//!
//! Works without `std` (an allocator is required). Enable the `std` feature
//! for `std::error::Error` integration through the error type.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > 0.0)` is used on purpose so NaN lands in the error branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dde_sim;
pub mod discretization;
pub mod error;
pub mod linalg;
pub mod model;
pub mod bifurcation;
pub mod char_spectrum;
pub mod problem;
pub mod spectral;
pub mod steady_state;

pub use bifurcation::{Bifurcation, Region, StabilityReport, ThetaCoefficients};
pub use char_spectrum::{linearize, rightmost_eigenvalues, LinearizedPair, SpectrumOptions, SpectrumResult};
pub use dde_sim::{detect_behavior, simulate, BehaviorSummary, History, SimConfig, Trace, Verdict};
pub use discretization::{Grid, KernelOp, LaplacianOp, Quadrature};
pub use error::{Error, Result};
pub use model::{BoundaryCondition, KernelSpec, ModelParams};
pub use problem::Problem;
pub use spectral::{principal_eigenpair, PrincipalPair};
pub use steady_state::{newton_solve, SteadyStateResult};
