//! Bias-corrected transfer from a dense source domain, the pooled baseline, and the
//! oracle bandwidth/rate calculator for the locally linear transfer estimator.
//!
//! The transfer estimator is built in three steps:
//!
//! 1. fit `m1_hat` on the source sample with bandwidth `h1`;
//! 2. form target residuals `r_t = y_t - m1_hat(u_t, x_t)` and smooth them with
//!    bandwidth `h_tl` to get the bias estimate `b_hat`;
//! 3. predict `m1_hat(u, x) + b_hat(u, x)`.
//!
//! Both steps use the same method (Nadaraya–Watson or locally linear).

use std::collections::HashSet;
use std::sync::Arc;

use crate::bandwidth::{cv_select, default_grid, CvPlan, CvResult, FoldScheme, DEFAULT_FOLDS};
use crate::error::{Component, Error, Result};
use crate::estimators::{Estimator, LocalFit, Method};
use crate::kernels::{Bandwidth, KernelSpec};
use crate::sample::{Domain, Sample};

/// Source fit plus a smoother of the target residuals.
#[derive(Debug, Clone)]
pub struct TransferFit {
    source_fit: Estimator,
    bias_fit: Estimator,
    method: Method,
    n_skipped_residuals: usize,
}

/// First- and second-order smoothness of the bias surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasSmoothness {
    /// `sup ||grad b||_2`.
    pub eta1: f64,
    /// `sup ||hess b||_F`.
    pub eta2: f64,
}

impl BiasSmoothness {
    pub fn new(eta1: f64, eta2: f64) -> Result<Self> {
        if !(eta1 >= 0.0 && eta2 >= 0.0 && eta1.is_finite() && eta2.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "smoothness constants must be finite and nonnegative, got ({eta1}, {eta2})"
            )));
        }
        Ok(Self { eta1, eta2 })
    }
}

/// Residuals of the target responses against `source_fit`, as a sample on the target
/// design. Target points where the source window is empty are dropped; their count is
/// returned alongside.
pub fn residual_sample(target: &Sample, source_fit: &Estimator) -> Result<(Sample, usize)> {
    let mut keep = Vec::with_capacity(target.len());
    let mut residuals = Vec::with_capacity(target.len());
    for t in 0..target.len() {
        match source_fit.predict(target.times()[t], target.x_row(t)) {
            Ok(m1) => {
                keep.push(t);
                residuals.push(target.responses()[t] - m1);
            }
            Err(e) if e.is_empty_window() => {}
            Err(e) => return Err(e),
        }
    }
    let skipped = target.len() - keep.len();
    if 2 * skipped > target.len() || keep.is_empty() {
        return Err(Error::TransferInfeasible {
            skipped,
            total: target.len(),
        });
    }
    let design = target.subset(&keep)?;
    Ok((design.with_responses(residuals)?, skipped))
}

fn check_domains(target: &Sample, source: &Sample) -> Result<()> {
    if target.domain() != Domain::Target || source.domain() != Domain::Source {
        return Err(Error::InvalidInput(
            "transfer expects a target-labelled and a source-labelled sample".into(),
        ));
    }
    if target.dim() != source.dim() {
        return Err(Error::Shape(format!(
            "target has {} covariates, source has {}",
            target.dim(),
            source.dim()
        )));
    }
    Ok(())
}

/// Fits the transfer estimator with fixed bandwidths.
pub fn fit_transfer(
    target: &Sample,
    source: &Sample,
    spec: &KernelSpec,
    h1: &Bandwidth,
    h_tl: &Bandwidth,
    method: Method,
) -> Result<TransferFit> {
    check_domains(target, source)?;
    let source_fit = Estimator::new(Arc::new(source.clone()), *spec, h1.clone(), method)?;
    let (residuals, skipped) = residual_sample(target, &source_fit)?;
    let bias_fit = Estimator::new(Arc::new(residuals), *spec, h_tl.clone(), method)?;
    Ok(TransferFit {
        source_fit,
        bias_fit,
        method,
        n_skipped_residuals: skipped,
    })
}

/// Bandwidths chosen for a cross-validated transfer fit.
#[derive(Debug, Clone)]
pub struct TransferSelection {
    pub source_cv: CvResult,
    pub bias_cv: CvResult,
}

/// Fits the transfer estimator with `h1` cross-validated on the source sample and
/// `h_tl` cross-validated on the target residuals, both over their default grids.
pub fn fit_transfer_cv(
    target: &Sample,
    source: &Sample,
    spec: &KernelSpec,
    method: Method,
) -> Result<(TransferFit, TransferSelection)> {
    fit_transfer_cv_with(target, source, spec, method, FoldScheme::ContiguousBlocks)
}

/// [`fit_transfer_cv`] with both selections using `scheme`.
pub fn fit_transfer_cv_with(
    target: &Sample,
    source: &Sample,
    spec: &KernelSpec,
    method: Method,
    scheme: FoldScheme,
) -> Result<(TransferFit, TransferSelection)> {
    check_domains(target, source)?;
    let plan = CvPlan::default_for(source, method)?.with_scheme(scheme);
    let source_cv = cv_select(source, spec, &plan)?;
    let (fit, bias_cv) = select_bias(target, source, spec, &source_cv.best, method, scheme)?;
    Ok((fit, TransferSelection { source_cv, bias_cv }))
}

/// Fits the source with a fixed `h1` and cross-validates `h_tl` on the target residuals.
pub fn fit_transfer_select_bias(
    target: &Sample,
    source: &Sample,
    spec: &KernelSpec,
    h1: &Bandwidth,
    method: Method,
) -> Result<(TransferFit, CvResult)> {
    select_bias(
        target,
        source,
        spec,
        h1,
        method,
        FoldScheme::ContiguousBlocks,
    )
}

fn select_bias(
    target: &Sample,
    source: &Sample,
    spec: &KernelSpec,
    h1: &Bandwidth,
    method: Method,
    scheme: FoldScheme,
) -> Result<(TransferFit, CvResult)> {
    check_domains(target, source)?;
    let source_fit = Estimator::new(Arc::new(source.clone()), *spec, h1.clone(), method)?;
    let (residuals, skipped) = residual_sample(target, &source_fit)?;
    let plan = CvPlan::new(
        DEFAULT_FOLDS.min(residuals.len()).max(2),
        default_grid(&residuals)?,
        method,
    )?
    .with_scheme(scheme);
    let bias_cv = cv_select(&residuals, spec, &plan)?;
    let bias_fit = Estimator::new(Arc::new(residuals), *spec, bias_cv.best.clone(), method)?;
    Ok((
        TransferFit {
            source_fit,
            bias_fit,
            method,
            n_skipped_residuals: skipped,
        },
        bias_cv,
    ))
}

impl TransferFit {
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn source_fit(&self) -> &Estimator {
        &self.source_fit
    }

    pub fn bias_fit(&self) -> &Estimator {
        &self.bias_fit
    }

    /// Target observations left out of the bias smoother because the source had no data there.
    pub fn n_skipped_residuals(&self) -> usize {
        self.n_skipped_residuals
    }

    pub fn source_predict(&self, u: f64, x: &[f64]) -> Result<f64> {
        self.source_fit
            .predict(u, x)
            .map_err(|e| tag_component(e, Component::Source))
    }

    pub fn bias_predict(&self, u: f64, x: &[f64]) -> Result<f64> {
        self.bias_fit
            .predict(u, x)
            .map_err(|e| tag_component(e, Component::Bias))
    }

    /// `m1_hat(u, x) + b_hat(u, x)`.
    pub fn predict(&self, u: f64, x: &[f64]) -> Result<f64> {
        Ok(self.source_predict(u, x)? + self.bias_predict(u, x)?)
    }

    /// Value and scaled gradient of the locally linear transfer fit.
    ///
    /// The source gradient is converted from `h1` scaling to `h_tl` scaling before it is
    /// added to the bias gradient.
    pub fn predict_full(&self, u: f64, x: &[f64]) -> Result<LocalFit> {
        if self.method != Method::Ll {
            return Err(Error::UnsupportedMethod);
        }
        let src = self
            .source_fit
            .fit_local(u, x)
            .map_err(|e| tag_component(e, Component::Source))?;
        let bias = self
            .bias_fit
            .fit_local(u, x)
            .map_err(|e| tag_component(e, Component::Bias))?;
        let h1 = self.source_fit.bandwidth();
        let h_tl = self.bias_fit.bandwidth();
        let scaled_gradient = bias
            .scaled_gradient
            .iter()
            .zip(&src.scaled_gradient)
            .enumerate()
            .map(|(k, (b, s))| b + s / h1.axis(k) * h_tl.axis(k))
            .collect();
        Ok(LocalFit {
            value: src.value + bias.value,
            scaled_gradient,
            diag: bias.diag,
        })
    }
}

/// `tl_predict`: the transfer estimate at `(u, x)`.
pub fn tl_predict(fit: &TransferFit, u: f64, x: &[f64]) -> Result<f64> {
    fit.predict(u, x)
}

/// `tl_predict_full`: locally linear transfer estimate with its scaled gradient.
pub fn tl_predict_full(fit: &TransferFit, u: f64, x: &[f64]) -> Result<LocalFit> {
    fit.predict_full(u, x)
}

fn tag_component(e: Error, component: Component) -> Error {
    match e {
        Error::EmptyWindow { u } => Error::ComponentEmptyWindow { component, u },
        other => other,
    }
}

/// Mean and population standard deviation.
pub fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Affinely maps `source` onto the mean and population variance of `reference`.
pub fn standardize_to(source: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
    if reference.is_empty() {
        return Err(Error::EmptyInput("reference responses"));
    }
    let (mu, sd) = moments(reference);
    if !(sd > 0.0) {
        return Err(Error::Degenerate(
            "target responses have zero variance".into(),
        ));
    }
    if source.is_empty() {
        return Ok(Vec::new());
    }
    let (mu_s, sd_s) = moments(source);
    Ok(source
        .iter()
        .map(|y| {
            if sd_s > 0.0 {
                mu + sd * (y - mu_s) / sd_s
            } else {
                mu
            }
        })
        .collect())
}

/// Union of the target training sample and the standardized source sample.
///
/// Source observations whose rescaled time coincides exactly with a target time are
/// dropped before merging.
pub fn pooled_sample(target_train: &Sample, source: &Sample) -> Result<Sample> {
    if target_train.dim() != source.dim() {
        return Err(Error::Shape(
            "target and source covariate dimensions differ".into(),
        ));
    }
    let y_std = standardize_to(source.responses(), target_train.responses())?;
    let taken: HashSet<u64> = target_train.times().iter().map(|u| u.to_bits()).collect();
    let kept: Vec<usize> = (0..source.len())
        .filter(|&t| !taken.contains(&source.times()[t].to_bits()))
        .collect();

    let d = target_train.dim();
    let total = target_train.len() + kept.len();
    let (mut u, mut x, mut y) = (
        Vec::with_capacity(total),
        Vec::with_capacity(total * d),
        Vec::with_capacity(total),
    );
    let (mut i, mut k) = (0, 0);
    while i < target_train.len() || k < kept.len() {
        let take_target = k == kept.len()
            || (i < target_train.len() && target_train.times()[i] <= source.times()[kept[k]]);
        if take_target {
            u.push(target_train.times()[i]);
            x.extend_from_slice(target_train.x_row(i));
            y.push(target_train.responses()[i]);
            i += 1;
        } else {
            let t = kept[k];
            u.push(source.times()[t]);
            x.extend_from_slice(source.x_row(t));
            y.push(y_std[t]);
            k += 1;
        }
    }
    Sample::from_flat(u, x, d, y, Domain::Target)
}

/// The pooled estimator fitted on [`pooled_sample`].
pub fn fit_pooled(
    target_train: &Sample,
    source: &Sample,
    spec: &KernelSpec,
    bw: &Bandwidth,
    method: Method,
) -> Result<Estimator> {
    let pooled = pooled_sample(target_train, source)?;
    Estimator::new(Arc::new(pooled), *spec, bw.clone(), method)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateCase {
    /// Strong local stationarity: `r >= (d + 1) / (d + 5)`.
    One,
    /// Nonstationary remainder dominates.
    Two,
    /// Weak stationarity but strong curvature alignment.
    Three,
}

impl RateCase {
    pub fn number(self) -> u8 {
        match self {
            RateCase::One => 1,
            RateCase::Two => 2,
            RateCase::Three => 3,
        }
    }
}

/// Oracle bandwidth and error orders of the locally linear transfer estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRate {
    pub case: RateCase,
    /// Order of the optimal `h_tl`, evaluated at the inputs.
    pub h_tl_order: f64,
    /// Order of the uniform error, evaluated at the inputs.
    pub rate_order: f64,
    /// Exponent of `T0` in `h_tl_order`.
    pub h_exponent: f64,
    /// Exponent of `T0` in `rate_order`.
    pub rate_exponent: f64,
    /// Case 2/3 cutoff on `eta2`.
    pub eta_threshold: f64,
}

/// Balances variance, curvature bias and the nonstationary remainder of the locally linear
/// transfer estimator.
///
/// `r` is the local-stationarity exponent, `eta2` the curvature of the bias surface.
pub fn oracle_rate(t0: u64, d: u32, r: f64, eta2: f64) -> Result<OracleRate> {
    if t0 < 2 {
        return Err(Error::InvalidInput(format!(
            "T0 must be at least 2, got {t0}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "r must lie in (0, 1], got {r}"
        )));
    }
    if !(eta2 > 0.0 && eta2 <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "eta2 must lie in (0, 1], got {eta2}"
        )));
    }
    let t = t0 as f64;
    let log_t = t.ln();
    let d = d as f64;
    let stationary_threshold = (d + 1.0) / (d + 5.0);
    let eta_threshold = log_t.sqrt() * t.powf((r * (d + 5.0) - (d + 1.0)) / (2.0 * (d + 1.0)));

    let variance_balanced = |case| {
        let h_exponent = -1.0 / (d + 5.0);
        let rate_exponent = -2.0 / (d + 5.0);
        OracleRate {
            case,
            h_tl_order: eta2.powf(-2.0 / (d + 5.0))
                * log_t.powf(1.0 / (d + 5.0))
                * t.powf(h_exponent),
            rate_order: eta2.powf((d + 1.0) / (d + 5.0))
                * log_t.powf(2.0 / (d + 5.0))
                * t.powf(rate_exponent),
            h_exponent,
            rate_exponent,
            eta_threshold,
        }
    };

    Ok(if r >= stationary_threshold {
        variance_balanced(RateCase::One)
    } else if eta2 > eta_threshold {
        let h_exponent = -r / (d + 2.0);
        let rate_exponent = -2.0 * r / (d + 2.0);
        OracleRate {
            case: RateCase::Two,
            h_tl_order: eta2.powf(1.0 / (d + 2.0)) * t.powf(h_exponent),
            rate_order: eta2 * t.powf(rate_exponent),
            h_exponent,
            rate_exponent,
            eta_threshold,
        }
    } else {
        variance_balanced(RateCase::Three)
    })
}
