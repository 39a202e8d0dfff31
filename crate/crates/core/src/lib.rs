//! Kernel regression for locally stationary time series, with bias-corrected transfer
//! learning from a dense source domain.
//!
//! The regression model is `Y_t = m(t/T, X_t) + e_t`: the surface `m(u, x)` is smoothed
//! jointly in rescaled time `u = t/T` and the covariates. On top of the single-domain
//! Nadaraya–Watson and locally linear estimators the crate provides a two-step transfer
//! estimator: fit the long source series, then smooth the target residuals to estimate
//! the bias surface `b = m_target - m_source`.
//!
//! ```
//! use std::sync::Arc;
//! use tvkern::{Bandwidth, Domain, Estimator, KernelSpec, Method, Sample};
//!
//! let n = 400;
//! let x: Vec<Vec<f64>> = (0..n).map(|t| vec![(t as f64 * 0.618).fract()]).collect();
//! let y: Vec<f64> = x.iter().map(|x| 1.0 + 2.0 * x[0]).collect();
//! let sample = Sample::from_series(x, y, Domain::Target)?;
//!
//! let bw = Bandwidth::uniform(0.1, 1)?;
//! let ll = Estimator::new(Arc::new(sample), KernelSpec::epanechnikov(), bw, Method::Ll)?;
//! assert!((ll.predict(0.5, &[0.25])? - 1.5).abs() < 1e-10);
//! # Ok::<(), tvkern::Error>(())
//! ```
//!
//! A longer walk-through lives in the `book/` directory of the repository; its code
//! listings are compiled and run as doc-tests of this crate.

// Range checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod datagen;
pub mod empirical;
pub mod error;
pub mod estimators;
pub mod kernels;
pub mod local_design;
pub mod metrics;
pub mod sample;
pub mod transfer;

pub use bandwidth::{cv_select, default_grid, CvPlan, CvResult};
pub use error::{Error, ErrorKind, Result};
pub use estimators::{fit_surface, ll_fit, nw_predict, Estimator, LocalFit, Method};
pub use kernels::{Bandwidth, KernelSpec};
pub use metrics::{GridSpec, Surface};
pub use sample::{Domain, Sample};
pub use transfer::{fit_pooled, fit_transfer, oracle_rate, TransferFit};

// Every chapter of the guide is compiled as a doc-test.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/local-linear.md")]
    mod local_linear {}
    #[doc = include_str!("../../../book/src/bandwidth.md")]
    mod bandwidth {}
    #[doc = include_str!("../../../book/src/transfer.md")]
    mod transfer {}
    #[doc = include_str!("../../../book/src/rates.md")]
    mod rates {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/empirical.md")]
    mod empirical {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
