//! Duality-method solvers for nonlocal Dirichlet problems `L u = mu` with
//! zero exterior values, for symmetric jump kernels comparable to the
//! fractional Laplacian.
//!
//! The pipeline is: a [`kernel::KernelSpec`] and a [`domain::DomainShape`]
//! on a [`domain::Grid`] give a [`domain::DomainMask`]; [`operator::assemble`]
//! builds the discrete operator; [`solve`] provides weak, duality and
//! exterior-data solves; [`analysis`] and [`riesz`] hold norms, exponent
//! arithmetic, refinement scans and potential-theory checks.

pub mod analysis;
pub mod domain;
pub mod error;
pub mod field;
pub mod kernel;
pub mod measure;
pub mod operator;
pub mod par;
pub mod riesz;
pub mod solve;
pub mod special;

pub use domain::{build_mask, DomainMask, DomainShape, Grid};
pub use error::{Error, Result};
pub use field::GridFunction;
pub use kernel::{KernelSpec, QuadConfig};
pub use measure::RadonMeasure;
pub use operator::{assemble, DiscreteOperator};
pub use solve::{SolveReport, SolverConfig};
