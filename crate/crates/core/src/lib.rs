//! Exact calculus, subordinate random walks and boundary Harnack experiments
//! on the infinite Sierpinski gasket.
//!
//! - [`geometry`]: exact points, cells, windows and their graphs
//! - [`calculus`] and [`spline`]: energy, Laplacian, normal derivatives and the
//!   biharmonic spline `phi0` in exact rationals
//! - [`stable`]: the fractional generator `(I - P)^beta` and its solvers
//! - [`mc`]: the Monte Carlo oracle for the same chain
//! - [`bhi`]: experiment configs and batteries
//! - [`io`]: CSV/JSON output and run manifests

pub mod bhi;
pub mod calculus;
pub mod error;
pub mod geometry;
pub mod io;
pub mod mc;
pub mod spline;
pub mod stable;

pub use num_rational;

pub use bhi::{BhiReport, ExperimentConfig, LemmaReport, ScalingReport};
pub use error::{Error, Result};
pub use geometry::{Cell, ExactPoint, GasketGraph, WindowSpec};
pub use mc::SeedPlan;
pub use stable::{FractionalOperator, RimPolicy, StableParams, WalkOperator};
