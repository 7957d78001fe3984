//! Numerical laboratory for subordinate killed stable operators `ψ(−L_|D)`
//! on a bounded interval: discretization, spectral calculus, Green and
//! Poisson kernels, semilinear boundary blow-up solvers and rate fitting.
//!
//! Routines are generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the double-precision instances used by the command line.

pub mod analysis;
pub mod bernstein;
pub mod cli;
pub mod discretize;
pub mod error;
pub mod kernels;
pub mod quad;
pub mod real;
pub mod semilinear;
pub mod spectral;

pub use error::{LabError, Result};
pub use real::Real;

pub type Grid64 = discretize::Grid<f64>;
pub type OperatorMatrix64 = discretize::OperatorMatrix<f64>;
pub type Spectrum64 = spectral::Spectrum<f64>;
pub type FunctionalCalculus64 = spectral::FunctionalCalculus<f64>;
pub type BernsteinSpec64 = bernstein::BernsteinSpec<f64>;
pub type PoissonKernel64 = kernels::PoissonKernel<f64>;
pub type Problem64 = semilinear::Problem<f64>;
pub type SolveReport64 = semilinear::SolveReport<f64>;
pub type RateFit64 = analysis::RateFit<f64>;
