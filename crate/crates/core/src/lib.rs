//! Spectral factorization of multivariate stationary time series with smooth
//! eigenvalues, and the Wold-representation outputs derived from it.
//!
//! The pipeline runs on a uniform frequency grid:
//!
//! 1. [`spectra`] samples the spectral density `f(ω)` (from a moving-average
//!    specification, a covariance sequence, or raw samples).
//! 2. [`eigenfield`] decomposes `f = Ũ Λ Ũ*` node by node, detects the a.e.
//!    rank, aligns eigenvector phases across frequencies and checks that the
//!    aligned field has one-sided Fourier coefficients.
//! 3. [`cepstral`] factors every eigenvalue as `λ_j = |γ_j|²` with `γ_j`
//!    outer, through the cepstrum of `log λ_j`.
//! 4. [`factor`] assembles `φ = √(2π) Ũ Γ` and its Moore–Penrose inverse,
//!    extracting the Wold coefficients `b(j)` and the inverse filter.
//! 5. [`wold`] produces the innovation covariance, Kolmogorov–Szegő checks,
//!    noise recovery and h-step prediction.
//!
//! [`pipeline`] wires these steps together and [`simulate`] generates sample
//! paths and round-trip validations.

pub mod cepstral;
pub mod eigenfield;
pub mod error;
pub mod factor;
pub mod io;
pub mod numeric;
pub mod pipeline;
pub mod simulate;
pub mod spectra;
pub mod wold;

pub use error::{Error, Result};
pub use numeric::{CMatrix, CVector};
