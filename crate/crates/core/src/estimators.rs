//! Nadaraya–Watson and multivariate locally linear estimators on a single domain.
//!
//! Both smooth jointly over rescaled time and covariates with the product kernel of
//! [`crate::kernels`]. The locally linear estimator returns the surface value together
//! with its first derivatives scaled by the per-axis bandwidths.

use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{Bandwidth, KernelSpec};
use crate::local_design::{self, SolveDiagnostics, DEFAULT_MASS_FLOOR, DEFAULT_RIDGE_REL};
use crate::metrics::{GridSpec, Surface};
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Nadaraya–Watson (local constant).
    Nw,
    /// Locally linear.
    Ll,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Nw => "NW",
            Method::Ll => "LL",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nw" => Ok(Method::Nw),
            "ll" => Ok(Method::Ll),
            other => Err(Error::InvalidInput(format!(
                "unknown method `{other}` (nw | ll)"
            ))),
        }
    }
}

/// Numerical guards applied to every local fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub mass_floor: f64,
    pub ridge_rel: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            mass_floor: DEFAULT_MASS_FLOOR,
            ridge_rel: DEFAULT_RIDGE_REL,
        }
    }
}

/// Result of a locally linear fit at one query.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    pub value: f64,
    /// `(h_time * dm/du, h_1 * dm/dx^1, ...)`.
    pub scaled_gradient: Vec<f64>,
    pub diag: SolveDiagnostics,
}

/// Nadaraya–Watson estimate at `(u, x)`.
pub fn nw_predict(
    sample: &Sample,
    spec: &KernelSpec,
    bw: &Bandwidth,
    u: f64,
    x: &[f64],
) -> Result<f64> {
    local_design::check_query(sample, bw, u, x)?;
    nw_excluding(
        sample,
        spec,
        bw,
        u,
        x,
        sample.responses(),
        0..0,
        DEFAULT_MASS_FLOOR,
    )
}

/// Locally linear estimate at `(u, x)`.
pub fn ll_fit(
    sample: &Sample,
    spec: &KernelSpec,
    bw: &Bandwidth,
    u: f64,
    x: &[f64],
) -> Result<LocalFit> {
    local_design::check_query(sample, bw, u, x)?;
    ll_excluding(
        sample,
        spec,
        bw,
        u,
        x,
        sample.responses(),
        0..0,
        SolverOptions::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn nw_excluding(
    sample: &Sample,
    spec: &KernelSpec,
    bw: &Bandwidth,
    u: f64,
    x: &[f64],
    responses: &[f64],
    exclude: Range<usize>,
    mass_floor: f64,
) -> Result<f64> {
    let reach = bw.h_time() * spec.support_radius();
    let times = sample.times();
    let (mut mass, mut acc, mut active) = (0.0, 0.0, 0usize);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in sample.time_window(u - reach, u + reach) {
        if exclude.contains(&t) {
            continue;
        }
        let w = spec.weight_unchecked(bw, u, times[t], x, sample.x_row(t));
        if w > 0.0 {
            mass += w;
            acc += w * responses[t];
            active += 1;
            lo = lo.min(responses[t]);
            hi = hi.max(responses[t]);
        }
    }
    if active == 0 || mass / (sample.len() as f64) < mass_floor {
        return Err(Error::EmptyWindow { u });
    }
    // the ratio can round just outside the response range; keep it inside
    let value = (acc / mass).clamp(lo, hi);
    if !value.is_finite() {
        return Err(Error::Numeric(format!("non-finite NW estimate at u = {u}")));
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn ll_excluding(
    sample: &Sample,
    spec: &KernelSpec,
    bw: &Bandwidth,
    u: f64,
    x: &[f64],
    responses: &[f64],
    exclude: Range<usize>,
    options: SolverOptions,
) -> Result<LocalFit> {
    let raw = local_design::accumulate_raw(sample, spec, bw, u, x, &[responses], exclude);
    let (coef, diag) = raw
        .solve_all(
            sample.len() as f64,
            u,
            options.mass_floor,
            options.ridge_rel,
        )?
        .pop()
        .expect("one response vector");
    Ok(LocalFit {
        value: coef[0],
        scaled_gradient: coef.iter().skip(1).copied().collect(),
        diag,
    })
}

/// A fitted single-domain estimator: sample, kernel, bandwidth and method frozen together.
#[derive(Debug, Clone)]
pub struct Estimator {
    sample: Arc<Sample>,
    spec: KernelSpec,
    bw: Bandwidth,
    method: Method,
    options: SolverOptions,
}

impl Estimator {
    pub fn new(
        sample: Arc<Sample>,
        spec: KernelSpec,
        bw: Bandwidth,
        method: Method,
    ) -> Result<Self> {
        if bw.dim() != sample.dim() {
            return Err(Error::Shape(format!(
                "bandwidth has {} covariate axes, sample has {}",
                bw.dim(),
                sample.dim()
            )));
        }
        Ok(Self {
            sample,
            spec,
            bw,
            method,
            options: SolverOptions::default(),
        })
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn sample(&self) -> &Arc<Sample> {
        &self.sample
    }

    pub fn bandwidth(&self) -> &Bandwidth {
        &self.bw
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn predict(&self, u: f64, x: &[f64]) -> Result<f64> {
        local_design::check_query(&self.sample, &self.bw, u, x)?;
        let y = self.sample.responses();
        match self.method {
            Method::Nw => nw_excluding(
                &self.sample,
                &self.spec,
                &self.bw,
                u,
                x,
                y,
                0..0,
                self.options.mass_floor,
            ),
            Method::Ll => ll_excluding(
                &self.sample,
                &self.spec,
                &self.bw,
                u,
                x,
                y,
                0..0,
                self.options,
            )
            .map(|f| f.value),
        }
    }

    /// Full locally linear output; errors for the Nadaraya–Watson method.
    pub fn fit_local(&self, u: f64, x: &[f64]) -> Result<LocalFit> {
        if self.method != Method::Ll {
            return Err(Error::UnsupportedMethod);
        }
        local_design::check_query(&self.sample, &self.bw, u, x)?;
        ll_excluding(
            &self.sample,
            &self.spec,
            &self.bw,
            u,
            x,
            self.sample.responses(),
            0..0,
            self.options,
        )
    }

    pub fn surface(&self, grid: &GridSpec) -> Result<Surface> {
        evaluate_surface(grid, |u, x| self.predict(u, x))
    }
}

/// Evaluates `f` at every grid cell in parallel; empty windows become missing cells.
pub fn evaluate_surface(
    grid: &GridSpec,
    f: impl Fn(f64, &[f64]) -> Result<f64> + Sync,
) -> Result<Surface> {
    let values = (0..grid.n_cells())
        .into_par_iter()
        .map(|idx| {
            let (u, x) = grid.point(idx);
            match f(u, &x) {
                Ok(v) => Ok(Some(v)),
                Err(e) if e.is_empty_window() => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Surface::new(grid.clone(), values)
}

/// Fits `method` at every cell of `grid`.
pub fn fit_surface(
    sample: &Sample,
    spec: &KernelSpec,
    bw: &Bandwidth,
    grid: &GridSpec,
    method: Method,
) -> Result<Surface> {
    if grid.dim() != sample.dim() {
        return Err(Error::Shape(format!(
            "grid has {} covariate axes, sample has {}",
            grid.dim(),
            sample.dim()
        )));
    }
    let est = Estimator::new(Arc::new(sample.clone()), *spec, bw.clone(), method)?;
    est.surface(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Domain;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn scattered(n: usize, f: impl Fn(f64, f64) -> f64) -> Sample {
        let u: Vec<f64> = (1..=n).map(|t| t as f64 / n as f64).collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|t| vec![((t as f64 * 0.618_033_988_75).fract())])
            .collect();
        let y = u.iter().zip(&x).map(|(&u, x)| f(u, x[0])).collect();
        Sample::new(u, x, y, Domain::Target).unwrap()
    }

    #[test]
    fn nw_single_and_constant() {
        let spec = KernelSpec::epanechnikov();
        let bw = Bandwidth::uniform(0.1, 1).unwrap();
        let s = Sample::new(
            vec![0.5, 0.9],
            vec![vec![0.5], vec![0.1]],
            vec![4.0, 9.0],
            Domain::Target,
        )
        .unwrap();
        assert_eq!(nw_predict(&s, &spec, &bw, 0.52, &[0.48]).unwrap(), 4.0);

        let c = scattered(200, |_, _| 2.5);
        let bw = Bandwidth::uniform(0.2, 1).unwrap();
        assert!((nw_predict(&c, &spec, &bw, 0.3, &[0.7]).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn nw_equidistant_pair() {
        let spec = KernelSpec::epanechnikov();
        let bw = Bandwidth::uniform(0.2, 1).unwrap();
        let s = Sample::new(
            vec![0.4, 0.6],
            vec![vec![0.5], vec![0.5]],
            vec![0.0, 4.0],
            Domain::Target,
        )
        .unwrap();
        let w0 = spec.product_weight(&bw, 0.5, 0.4, &[0.5], &[0.5]).unwrap();
        let w1 = spec.product_weight(&bw, 0.5, 0.6, &[0.5], &[0.5]).unwrap();
        assert_eq!(w0, w1);
        assert_eq!(nw_predict(&s, &spec, &bw, 0.5, &[0.5]).unwrap(), 2.0);
    }

    #[test]
    fn nw_empty_window() {
        let s = scattered(20, |_, _| 1.0);
        let bw = Bandwidth::uniform(0.01, 1).unwrap();
        let r = nw_predict(&s, &KernelSpec::epanechnikov(), &bw, 0.525, &[0.99]);
        assert!(matches!(r, Err(Error::EmptyWindow { .. })));
    }

    #[test]
    fn rejects_time_outside_unit_interval() {
        let s = scattered(20, |_, _| 1.0);
        let bw = Bandwidth::uniform(0.3, 1).unwrap();
        assert!(matches!(
            nw_predict(&s, &KernelSpec::epanechnikov(), &bw, 1.2, &[0.5]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn ll_affine_is_exact() {
        let s = scattered(500, |u, x| 2.0 + 3.0 * u + 4.0 * x);
        let bw = Bandwidth::new(0.1, vec![0.15]).unwrap();
        let fit = ll_fit(&s, &KernelSpec::epanechnikov(), &bw, 0.4, &[0.6]).unwrap();
        assert!((fit.value - (2.0 + 1.2 + 2.4)).abs() < 1e-10);
        assert!((fit.scaled_gradient[0] - 0.3).abs() < 1e-10);
        assert!((fit.scaled_gradient[1] - 0.6).abs() < 1e-10);
    }

    #[test]
    fn ll_single_point_with_ridge() {
        let s = Sample::new(vec![0.5], vec![vec![0.5]], vec![3.0], Domain::Target).unwrap();
        let bw = Bandwidth::uniform(0.2, 1).unwrap();
        let fit = ll_fit(&s, &KernelSpec::epanechnikov(), &bw, 0.5, &[0.5]).unwrap();
        assert!(fit.diag.ridge_applied);
        // closed form: (g + ridge)^-1 g y with ridge = 1e-10 * g
        assert!((fit.value - 3.0 / (1.0 + 1e-10)).abs() < 1e-14);
        assert_eq!(fit.scaled_gradient, vec![0.0, 0.0]);
    }

    #[test]
    fn ll_matches_dense_weighted_least_squares() {
        let xq = 0.45;
        let s = scattered(300, |_, x| (x - xq).powi(2));
        let spec = KernelSpec::epanechnikov();
        let bw = Bandwidth::new(0.3, vec![0.2]).unwrap();
        let fit = ll_fit(&s, &spec, &bw, 0.5, &[xq]).unwrap();

        let mut rows = Vec::new();
        for t in 0..s.len() {
            let w = spec
                .product_weight(&bw, 0.5, s.times()[t], &[xq], s.x_row(t))
                .unwrap();
            if w > 0.0 {
                let sw = w.sqrt();
                rows.push([
                    sw,
                    sw * (s.times()[t] - 0.5) / 0.3,
                    sw * (s.x_row(t)[0] - xq) / 0.2,
                    sw * s.responses()[t],
                ]);
            }
        }
        let a = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i][j]);
        let b = DVector::from_fn(rows.len(), |i, _| rows[i][3]);
        let oracle = a.svd(true, true).solve(&b, 1e-14).unwrap();
        assert!(fit.value > 0.0);
        assert!((fit.value - oracle[0]).abs() < 1e-10);
    }

    #[test]
    fn nw_and_ll_agree_on_symmetric_flat_design() {
        // Symmetric design about the query with weights ~ constant: LL slope terms decouple.
        let mut u = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..21 {
            for j in 0..21 {
                u.push(0.4 + 0.01 * i as f64);
                x.push(vec![0.4 + 0.01 * j as f64]);
                y.push(((i as f64 - 10.0).powi(2) + (j as f64 - 10.0).abs()) * 0.01);
            }
        }
        let s = Sample::new(u, x, y, Domain::Target).unwrap();
        let spec = KernelSpec::epanechnikov();
        let bw = Bandwidth::uniform(1.0, 1).unwrap();
        let nw = nw_predict(&s, &spec, &bw, 0.5, &[0.5]).unwrap();
        let ll = ll_fit(&s, &spec, &bw, 0.5, &[0.5]).unwrap().value;
        assert!((nw - ll).abs() < 1e-8, "{nw} vs {ll}");
    }

    #[test]
    fn surface_examples() {
        let spec = KernelSpec::epanechnikov();
        let c = scattered(300, |_, _| -1.5);
        let bw = Bandwidth::uniform(0.2, 1).unwrap();
        let grid = GridSpec::unit_square(12).unwrap();
        for method in [Method::Nw, Method::Ll] {
            let surf = fit_surface(&c, &spec, &bw, &grid, method).unwrap();
            let worst = surf
                .values
                .iter()
                .flatten()
                .map(|v| (v + 1.5).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-12, "{method:?} {worst}");
        }

        let affine = scattered(2000, |u, x| 1.0 - 2.0 * u + 0.5 * x);
        let bw = Bandwidth::uniform(0.1, 1).unwrap();
        let surf = fit_surface(&affine, &spec, &bw, &grid, Method::Ll).unwrap();
        for i in 1..11 {
            for j in 1..11 {
                let (u, x) = (grid.node(0, i), grid.node(1, j));
                assert!((surf.at(i, j).unwrap() - (1.0 - 2.0 * u + 0.5 * x)).abs() < 1e-8);
            }
        }

        let one = GridSpec::new(2, (0.5, 0.6), vec![(0.3, 0.4)]).unwrap();
        let surf = fit_surface(&affine, &spec, &bw, &one, Method::Nw).unwrap();
        assert_eq!(
            surf.at(0, 0).unwrap(),
            nw_predict(&affine, &spec, &bw, 0.5, &[0.3]).unwrap()
        );
    }

    #[test]
    fn surface_marks_empty_cells_missing() {
        let s = Sample::new(
            vec![0.1, 0.2],
            vec![vec![0.1], vec![0.2]],
            vec![1.0, 2.0],
            Domain::Target,
        )
        .unwrap();
        let bw = Bandwidth::uniform(0.15, 1).unwrap();
        let grid = GridSpec::unit_square(5).unwrap();
        let surf = fit_surface(&s, &KernelSpec::epanechnikov(), &bw, &grid, Method::Nw).unwrap();
        assert!(surf.n_missing() > 0);
        assert!(surf.at(0, 0).is_some());
        assert!(surf.at(4, 4).is_none());
    }

    #[test]
    fn fit_local_rejects_nw() {
        let s = scattered(50, |u, _| u);
        let est = Estimator::new(
            Arc::new(s),
            KernelSpec::epanechnikov(),
            Bandwidth::uniform(0.3, 1).unwrap(),
            Method::Nw,
        )
        .unwrap();
        assert!(matches!(
            est.fit_local(0.5, &[0.5]),
            Err(Error::UnsupportedMethod)
        ));
    }

    proptest! {
        #[test]
        fn nw_stays_within_active_range(
            ys in proptest::collection::vec(-10.0f64..10.0, 60),
            h in 0.05f64..0.5, qu in 0.0f64..1.0, qx in 0.0f64..1.0,
        ) {
            let s = scattered(60, |_, _| 0.0).with_responses(ys).unwrap();
            let spec = KernelSpec::epanechnikov();
            let bw = Bandwidth::uniform(h, 1).unwrap();
            if let Ok(v) = nw_predict(&s, &spec, &bw, qu, &[qx]) {
                let active: Vec<f64> = (0..s.len())
                    .filter(|&t| spec.product_weight(&bw, qu, s.times()[t], &[qx], s.x_row(t)).unwrap() > 0.0)
                    .map(|t| s.responses()[t])
                    .collect();
                let lo = active.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = active.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }

        #[test]
        fn shift_equivariance(c in -50.0f64..50.0, qu in 0.1f64..0.9, qx in 0.1f64..0.9) {
            let s = scattered(400, |u, x| (5.0 * u).sin() * x);
            let shifted = s.with_responses(s.responses().iter().map(|y| y + c).collect()).unwrap();
            let spec = KernelSpec::epanechnikov();
            let bw = Bandwidth::uniform(0.15, 1).unwrap();
            let a = nw_predict(&s, &spec, &bw, qu, &[qx]).unwrap();
            let b = nw_predict(&shifted, &spec, &bw, qu, &[qx]).unwrap();
            prop_assert!((b - a - c).abs() < 1e-10);
            let a = ll_fit(&s, &spec, &bw, qu, &[qx]).unwrap().value;
            let b = ll_fit(&shifted, &spec, &bw, qu, &[qx]).unwrap().value;
            prop_assert!((b - a - c).abs() < 1e-9);
        }

        #[test]
        fn affine_response_equivariance(a in -5.0f64..5.0, b in -5.0f64..5.0, qu in 0.1f64..0.9, qx in 0.1f64..0.9) {
            let s = scattered(400, |u, x| (3.0 * x).cos() + u * u);
            let t = s.with_responses(s.responses().iter().map(|y| a * y + b).collect()).unwrap();
            let spec = KernelSpec::epanechnikov();
            let bw = Bandwidth::uniform(0.2, 1).unwrap();
            let f0 = ll_fit(&s, &spec, &bw, qu, &[qx]).unwrap();
            let f1 = ll_fit(&t, &spec, &bw, qu, &[qx]).unwrap();
            prop_assert!((f1.value - (a * f0.value + b)).abs() < 1e-9);
            for (g1, g0) in f1.scaled_gradient.iter().zip(&f0.scaled_gradient) {
                prop_assert!((g1 - a * g0).abs() < 1e-9);
            }
        }

        #[test]
        fn wider_bandwidth_never_loses_mass(h in 0.01f64..0.4, grow in 1.0f64..3.0, qu in 0.0f64..1.0, qx in 0.0f64..1.0) {
            let s = scattered(300, |_, _| 0.0);
            let spec = KernelSpec::epanechnikov();
            let narrow = Bandwidth::uniform(h, 1).unwrap();
            let wide = Bandwidth::uniform(h * grow, 1).unwrap();
            let a = local_design::assemble(&s, &spec, &narrow, qu, &[qx], s.responses()).unwrap();
            let b = local_design::assemble(&s, &spec, &wide, qu, &[qx], s.responses()).unwrap();
            prop_assert!(b.n_active >= a.n_active);
        }
    }
}
