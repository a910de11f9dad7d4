//! Numerical laboratory for spectral fluctuations of half-heavy-tailed
//! sample covariance matrices.
//!
//! A `P×N` data matrix with i.i.d. entries of tail index `α ∈ (2,4)` (finite
//! variance, infinite fourth moment) has sample covariance `A = XX*/N` whose
//! centred resolvent traces, scaled by `N^{α/4−1}`, fluctuate like a Gaussian
//! process with an explicit covariance kernel `C(z,w)`. This crate provides
//! both sides of that statement:
//!
//! - [`heavytail`] — a unit-variance two-sided Pareto law, its deterministic
//!   stream sampler, the `N^β` truncation transform, and the truncated
//!   characteristic function `φ_N`;
//! - [`spectral`] — matrix builds, spectra, trace resolvents, and exact
//!   finite-`N` resolvent identities (Ward, diagonal bounds, rank bounds);
//! - [`mplaw`] — closed-form Marchenko–Pastur quantities with verified branch
//!   selection;
//! - [`kernel`] — the limiting covariance kernel evaluated by three
//!   independent routes, plus the overlapping-submatrix extension;
//! - [`quadrature`] — double-exponential and Gauss–Kronrod integration for
//!   complex integrands with endpoint singularities, and Cauchy-integral
//!   numerical differentiation;
//! - [`montecarlo`] — the replica engine estimating the empirical covariance
//!   of the trace fluctuations and its diagnostics.

extern crate blas_src;

pub mod heavytail;
pub mod kernel;
pub mod montecarlo;
pub mod mplaw;
pub mod quadrature;
pub mod special;
pub mod spectral;

use num_complex::Complex64;

/// Crate-wide error type. The CLI maps variants onto exit codes
/// (validation 2, numeric 3, verification 4).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),
    #[error("empty request: {0}")]
    EmptyRequest(String),
    #[error("domain: {0}")]
    Domain(String),
    #[error("resource: {0}")]
    Resource(String),
    #[error("numeric: {0}")]
    Numeric(String),
    /// Refinement budget exhausted; carries the best value reached and its
    /// error estimate so callers can decide whether it is still usable.
    #[error("numeric: quadrature did not converge in {context}: best value {value}, err_est {err_est:e}")]
    QuadratureNoConvergence {
        context: String,
        value: Complex64,
        err_est: f64,
    },
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;
