//! Discrete delta hedging with ellipsoid-triggered rebalancing.
//!
//! The library solves the matrix equation `2 tr(x) x + 4 x^2 = c^2` that
//! characterizes the optimal rebalancing ellipsoid for a delta hedge, builds
//! hitting-time rebalancing schedules on a thin simulation mesh, and measures
//! the renormalized quadratic variation `N_T * <Z>_T` of the hedging error
//! against its theoretical floor `(integral of tr X dt)^2`.
//!
//! Modules:
//! - [`symmat`] — dense small-dimension symmetric linear algebra (Jacobi
//!   eigendecomposition, LU inversion, PSD square roots, quadratic forms);
//! - [`gamma`] — the ellipsoid matrix equation solver and the `Lambda` /
//!   `Lambda^mu` constructions;
//! - [`market`] — Black–Scholes market models with closed-form prices,
//!   deltas and gammas (two-asset exchange binary, one-asset call/digital);
//! - [`strategies`] — rebalancing schedules: ellipsoid hitting times,
//!   generic hitting families, uniform and fractional baselines;
//! - [`simulator`] — path simulation and the hedging-error measurement
//!   pipeline (quadratic variation, lower bound, beta ratios, diagnostics);
//! - [`harness`] — experiment configuration, parallel execution, CSV and
//!   SVG emission.

pub mod error;
pub mod gamma;
pub mod harness;
pub mod market;
pub mod rng;
pub mod simulator;
pub mod strategies;
pub mod symmat;

pub use error::{Error, Result};
