//! Sparse D-vine copula quantile regression.
//!
//! The crate is organised bottom-up:
//!
//! - [`bicop`]: parametric bivariate copulas (density, h-functions, fitting, family selection)
//! - [`margins`]: Gaussian-kernel marginal models and probability integral transforms
//! - [`dvine`]: D-vine models with the response as the first leaf
//! - [`select`]: the forward-selection algorithms (residual-based, partial-correlation
//!   based, and the full-extension baseline) with conditional-AIC stopping
//! - [`simbench`]: simulated data generators, performance metrics, replication harness
//! - [`genomics`]: SNP preprocessing, screening and grouped feature extraction
//!
//! ```
//! use sparsevine::select::{fit, Dataset, Method, SelectionConfig};
//! use sparsevine::simbench::{gen_dgp1, DgpConfig};
//!
//! let sample = gen_dgp1(&DgpConfig::dgp1(1, 7)).unwrap();
//! let data: Dataset = sample.train;
//! let config = SelectionConfig::new(Method::ParCor);
//! let (model, trace) = fit(&data, &config).unwrap();
//! let q = model.conditional_quantile(&data.row(0)[1..], 0.5).unwrap();
//! assert!(q.is_finite());
//! assert!(!trace.chosen.is_empty());
//! ```

pub mod bicop;
pub mod dvine;
pub mod error;
pub mod genomics;
pub mod margins;
pub mod numeric;
pub mod select;
pub mod simbench;
pub mod special;

pub use error::{Error, Result};

/// Pseudo-observations are clamped to `[EPS_UNIT, 1 - EPS_UNIT]` before any
/// copula evaluation.
pub const EPS_UNIT: f64 = 1e-10;

#[inline]
pub(crate) fn clamp_unit(u: f64) -> f64 {
    u.clamp(EPS_UNIT, 1.0 - EPS_UNIT)
}
