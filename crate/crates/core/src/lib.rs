//! Fit many least-squares surrogate models from one random design with a
//! single shared factorization, measure their excess prediction risk against
//! population optima, and run control-variate Monte Carlo integration on the
//! same design.
//!
//! The crate is organized around the lifecycle of a desk-scale experiment:
//!
//! * [`features`] builds evaluable basis maps (monomial, shifted Legendre,
//!   Fourier, piecewise indicator) on box domains;
//! * [`linear_core`] holds the shared linear-algebra substrate: Gram
//!   matrices, Cholesky factors with a pseudo-inverse fallback, the leverage
//!   function and whitening;
//! * [`population`] supplies sampleable input distributions with quadrature
//!   and Monte Carlo moment oracles;
//! * [`surrogate`] draws designs and fits whole response families with one
//!   factorization, with flop counters proving the amortization;
//! * [`risk`] computes excess risks, worst-case suprema and replicated
//!   convergence-rate curves;
//! * [`control_variates`] implements vanilla, control-variate and oracle
//!   Monte Carlo estimators and their rate comparison;
//! * [`diagnostics`] evaluates the leverage/residual summaries and condition
//!   ratios that govern the rates;
//! * [`applications`] wires the pieces into CDF/quantile estimation and
//!   sample-average-approximation optimization demos.

pub mod applications;
pub mod control_variates;
pub mod diagnostics;
pub mod error;
pub mod features;
pub mod grid;
pub mod linalg;
pub mod linear_core;
pub mod population;
pub mod response;
pub mod risk;
pub mod surrogate;

pub use error::{Error, Result};
