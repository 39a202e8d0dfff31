//! Local weighted least squares at a single query point.
//!
//! Row `t` of the local design is
//!
//! ```text
//! d_t = (1, (u_t - u) / h_time, (x^1_t - x^1) / h_1, ..., (x^d_t - x^d) / h_d)
//! ```
//!
//! weighted by the product kernel. The normal equations are accumulated as
//! `G = sum_t w_t d_t d_t' / T` and `m = sum_t w_t d_t r_t / T`; the solution is
//! `(value, h_time * d/du, h_1 * d/dx^1, ...)`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{Bandwidth, KernelSpec};
use crate::sample::Sample;

/// Below this total kernel mass a query is treated as having no data.
pub const DEFAULT_MASS_FLOOR: f64 = 1e-12;
/// Relative ridge added when the Gram matrix is close to singular.
pub const DEFAULT_RIDGE_REL: f64 = 1e-10;

/// Normal equations of one local fit.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSystem {
    pub gram: DMatrix<f64>,
    pub moment: DVector<f64>,
    /// Sum of kernel weights divided by the sample length.
    pub total_mass: f64,
    pub n_active: usize,
    /// Rescaled time of the query, kept for error reporting.
    pub u_query: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveDiagnostics {
    pub lambda_min_estimate: f64,
    pub ridge_applied: bool,
    pub ridge_magnitude: f64,
}

impl DesignSystem {
    pub fn from_parts(
        gram: DMatrix<f64>,
        moment: DVector<f64>,
        total_mass: f64,
        n_active: usize,
    ) -> Result<Self> {
        let p = moment.len();
        if gram.nrows() != p || gram.ncols() != p {
            return Err(Error::Shape(format!(
                "gram is {}x{}, moment has length {p}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        Ok(Self {
            gram,
            moment,
            total_mass,
            n_active,
            u_query: f64::NAN,
        })
    }

    /// Number of local coefficients, `d + 2`.
    pub fn order(&self) -> usize {
        self.moment.len()
    }
}

/// Builds the local normal equations of `responses` on the design of `sample` at `(u, x)`.
pub fn assemble(
    sample: &Sample,
    spec: &KernelSpec,
    bw: &Bandwidth,
    u: f64,
    x: &[f64],
    responses: &[f64],
) -> Result<DesignSystem> {
    if sample.is_empty() {
        return Err(Error::EmptyInput("sample"));
    }
    if responses.len() != sample.len() {
        return Err(Error::Shape(format!(
            "{} responses for a sample of length {}",
            responses.len(),
            sample.len()
        )));
    }
    check_query(sample, bw, u, x)?;
    Ok(accumulate(sample, spec, bw, u, x, responses, 0..0))
}

pub(crate) fn check_query(sample: &Sample, bw: &Bandwidth, u: f64, x: &[f64]) -> Result<()> {
    if x.len() != sample.dim() || bw.dim() != sample.dim() {
        return Err(Error::Shape(format!(
            "sample has {} covariates, query has {}, bandwidth has {}",
            sample.dim(),
            x.len(),
            bw.dim()
        )));
    }
    if !(0.0..=1.0).contains(&u) || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "query must have u in [0, 1] and finite covariates, got u = {u}"
        )));
    }
    Ok(())
}

/// Raw (unnormalised) sums of one local fit shared by several response vectors.
pub(crate) struct RawSums {
    p: usize,
    /// Upper triangle, row-major `p x p`.
    gram: Vec<f64>,
    moments: Vec<Vec<f64>>,
    /// `(min, max)` of each response vector over the active rows.
    range: Vec<(f64, f64)>,
    pub(crate) mass: f64,
    pub(crate) n_active: usize,
}

impl RawSums {
    /// Kernel-weighted mean of response vector `k`, kept inside the range of the active
    /// responses so rounding can never push it outside (a constant window is exact).
    pub(crate) fn weighted_mean(&self, k: usize) -> f64 {
        let (lo, hi) = self.range[k];
        (self.moments[k][0] / self.mass).clamp(lo, hi)
    }

    fn gram_matrix(&self, n: f64) -> DMatrix<f64> {
        let p = self.p;
        DMatrix::from_fn(p, p, |a, b| {
            let (i, j) = if a <= b { (a, b) } else { (b, a) };
            self.gram[i * p + j] / n
        })
    }

    fn moment_vector(&self, k: usize, n: f64) -> DVector<f64> {
        DVector::from_iterator(self.p, self.moments[k].iter().map(|v| v / n))
    }

    fn into_system(self, n: f64, u: f64) -> DesignSystem {
        DesignSystem {
            gram: self.gram_matrix(n),
            moment: self.moment_vector(0, n),
            total_mass: self.mass / n,
            n_active: self.n_active,
            u_query: u,
        }
    }

    /// Solves the local system for every response vector with a single factorisation.
    ///
    /// The factorisation works on the raw sums: dividing the Gram matrix and moments by
    /// the sample length `n` leaves the solution and the ridge decision unchanged, and
    /// skipping it makes the result independent of rows outside the window. Only the
    /// mass-floor test uses `n`.
    pub(crate) fn solve_all(
        &self,
        n: f64,
        u: f64,
        mass_floor: f64,
        ridge_rel: f64,
    ) -> Result<Vec<(DVector<f64>, SolveDiagnostics)>> {
        if !self.mass.is_finite() {
            return Err(Error::Numeric(
                "design system has non-finite entries".into(),
            ));
        }
        let moments: Vec<DVector<f64>> = (0..self.moments.len())
            .map(|k| self.moment_vector(k, 1.0))
            .collect();
        if moments.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric(
                "design system has non-finite entries".into(),
            ));
        }
        if self.n_active == 0 || self.mass / n < mass_floor {
            return Err(Error::EmptyWindow { u });
        }
        let (factor, mut diag) = Factor::new(self.gram_matrix(1.0), ridge_rel)?;
        diag.lambda_min_estimate /= n;
        diag.ridge_magnitude /= n;
        moments
            .iter()
            .map(|m| factor.solve(m).map(|c| (c, diag)))
            .collect()
    }
}

/// Accumulation with the rows in `exclude` left out (used for held-out folds).
pub(crate) fn accumulate(
    sample: &Sample,
    spec: &KernelSpec,
    bw: &Bandwidth,
    u: f64,
    x: &[f64],
    responses: &[f64],
    exclude: Range<usize>,
) -> DesignSystem {
    accumulate_raw(sample, spec, bw, u, x, &[responses], exclude)
        .into_system(sample.len() as f64, u)
}

pub(crate) fn accumulate_raw(
    sample: &Sample,
    spec: &KernelSpec,
    bw: &Bandwidth,
    u: f64,
    x: &[f64],
    responses: &[&[f64]],
    exclude: Range<usize>,
) -> RawSums {
    accumulate_raw_group(sample, spec, &[bw], u, x, responses, |t| {
        exclude.contains(&t)
    })
    .pop()
    .expect("one candidate")
}

/// One scan of the time window for several bandwidths sharing `h_time`; the sums for
/// each candidate equal those of a separate [`accumulate_raw`] call.
pub(crate) fn accumulate_raw_group(
    sample: &Sample,
    spec: &KernelSpec,
    group: &[&Bandwidth],
    u: f64,
    x: &[f64],
    responses: &[&[f64]],
    exclude: impl Fn(usize) -> bool,
) -> Vec<RawSums> {
    let d = sample.dim();
    let p = d + 2;
    let mut sums: Vec<RawSums> = group
        .iter()
        .map(|_| RawSums {
            p,
            gram: vec![0.0; p * p],
            moments: vec![vec![0.0; p]; responses.len()],
            range: vec![(f64::INFINITY, f64::NEG_INFINITY); responses.len()],
            mass: 0.0,
            n_active: 0,
        })
        .collect();
    let Some(first) = group.first() else {
        return sums;
    };
    let h_time = first.h_time();
    debug_assert!(group.iter().all(|bw| bw.h_time() == h_time));
    let mut row = vec![0.0; p];

    let reach = h_time * spec.support_radius();
    let times = sample.times();
    for t in sample.time_window(u - reach, u + reach) {
        if exclude(t) {
            continue;
        }
        let k_time = spec.eval((u - times[t]) / h_time) / h_time;
        if k_time == 0.0 {
            continue;
        }
        let xt = sample.x_row(t);
        row[0] = 1.0;
        row[1] = (times[t] - u) / h_time;
        'candidates: for (bw, acc) in group.iter().zip(sums.iter_mut()) {
            let mut w = k_time;
            for ((&q, &o), &h) in x.iter().zip(xt).zip(bw.h_cov()) {
                let k = spec.eval((q - o) / h);
                if k == 0.0 {
                    continue 'candidates;
                }
                w *= k / h;
            }
            if w <= 0.0 {
                continue;
            }
            for j in 0..d {
                row[j + 2] = (xt[j] - x[j]) / bw.h_cov()[j];
            }
            for a in 0..p {
                let wa = w * row[a];
                for (moment, r) in acc.moments.iter_mut().zip(responses) {
                    moment[a] += wa * r[t];
                }
                for (b, &rb) in row.iter().enumerate().skip(a) {
                    acc.gram[a * p + b] += wa * rb;
                }
            }
            for (range, r) in acc.range.iter_mut().zip(responses) {
                *range = (range.0.min(r[t]), range.1.max(r[t]));
            }
            acc.mass += w;
            acc.n_active += 1;
        }
    }
    sums
}

/// Smallest eigenvalue of the Gram matrix.
pub fn min_eigenvalue(system: &DesignSystem) -> Result<f64> {
    smallest_eigenvalue(&system.gram)
}

fn smallest_eigenvalue(gram: &DMatrix<f64>) -> Result<f64> {
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("gram matrix has non-finite entries".into()));
    }
    Ok(gram
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min))
}

enum Factor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn new(mut gram: DMatrix<f64>, ridge_rel: f64) -> Result<(Self, SolveDiagnostics)> {
        let lambda_min = smallest_eigenvalue(&gram)?;
        let threshold = ridge_rel * gram.trace();
        let mut diag = SolveDiagnostics {
            lambda_min_estimate: lambda_min,
            ..Default::default()
        };
        if lambda_min < threshold {
            for k in 0..gram.nrows() {
                gram[(k, k)] += threshold;
            }
            diag.ridge_applied = threshold > 0.0;
            diag.ridge_magnitude = threshold;
        }
        let factor = match gram.clone().cholesky() {
            Some(chol) => Factor::Cholesky(chol),
            None => Factor::Lu(gram.lu()),
        };
        Ok((factor, diag))
    }

    fn solve(&self, moment: &DVector<f64>) -> Result<DVector<f64>> {
        let coef = match self {
            Factor::Cholesky(chol) => chol.solve(moment),
            Factor::Lu(lu) => lu
                .solve(moment)
                .ok_or_else(|| Error::Numeric("singular local design".into()))?,
        };
        if coef.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "local solve produced non-finite coefficients".into(),
            ));
        }
        Ok(coef)
    }
}

/// Solves the local normal equations, adding a relative ridge when the Gram matrix is
/// numerically singular.
pub fn solve(
    system: &DesignSystem,
    mass_floor: f64,
    ridge_rel: f64,
) -> Result<(DVector<f64>, SolveDiagnostics)> {
    if system.moment.iter().any(|v| !v.is_finite()) || !system.total_mass.is_finite() {
        return Err(Error::Numeric(
            "design system has non-finite entries".into(),
        ));
    }
    if system.n_active == 0 || system.total_mass < mass_floor {
        return Err(Error::EmptyWindow { u: system.u_query });
    }
    let (factor, diag) = Factor::new(system.gram.clone(), ridge_rel)?;
    Ok((factor.solve(&system.moment)?, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Domain;
    use approx::assert_relative_eq;

    fn line_sample(n: usize) -> Sample {
        let u: Vec<f64> = (1..=n).map(|t| t as f64 / n as f64).collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|t| vec![((t * 37) % n) as f64 / n as f64])
            .collect();
        let y = u
            .iter()
            .zip(&x)
            .map(|(&u, x)| 2.0 + 3.0 * u + 4.0 * x[0])
            .collect();
        Sample::new(u, x, y, Domain::Target).unwrap()
    }

    #[test]
    fn single_observation_at_query() {
        let s = Sample::new(vec![0.5], vec![vec![0.3]], vec![7.0], Domain::Target).unwrap();
        let bw = Bandwidth::uniform(0.5, 1).unwrap();
        let sys = assemble(&s, &KernelSpec::epanechnikov(), &bw, 0.5, &[0.3], &[7.0]).unwrap();
        let w = 2.25;
        assert_eq!(sys.gram[(0, 0)], w);
        assert_eq!(sys.gram.iter().filter(|v| **v != 0.0).count(), 1);
        assert_eq!(sys.moment[0], w * 7.0);
        assert_eq!(sys.n_active, 1);
    }

    #[test]
    fn outside_support_has_no_mass() {
        let s = Sample::new(
            vec![0.1, 0.2],
            vec![vec![0.0], vec![0.1]],
            vec![1.0, 2.0],
            Domain::Target,
        )
        .unwrap();
        let bw = Bandwidth::uniform(0.05, 1).unwrap();
        let sys = assemble(
            &s,
            &KernelSpec::epanechnikov(),
            &bw,
            0.9,
            &[0.9],
            &[1.0, 2.0],
        )
        .unwrap();
        assert_eq!(sys.total_mass, 0.0);
        assert_eq!(sys.n_active, 0);
        assert!(matches!(
            solve(&sys, DEFAULT_MASS_FLOOR, DEFAULT_RIDGE_REL),
            Err(Error::EmptyWindow { .. })
        ));
    }

    #[test]
    fn symmetric_pair_moment() {
        let (u, delta, c) = (0.5, 0.1, 3.0);
        let s = Sample::new(
            vec![u - delta, u + delta],
            vec![vec![0.4], vec![0.4]],
            vec![-c, c],
            Domain::Target,
        )
        .unwrap();
        let bw = Bandwidth::new(0.2, vec![0.3]).unwrap();
        let sys = assemble(
            &s,
            &KernelSpec::epanechnikov(),
            &bw,
            u,
            &[0.4],
            s.responses(),
        )
        .unwrap();
        assert!(sys.moment[0].abs() < 1e-15);
        // both rows have weight w = K(0.5)/0.2 * K(0)/0.3 and time offsets -/+0.5
        let w = 0.5625 / 0.2 * 0.75 / 0.3;
        assert_relative_eq!(sys.moment[1], 2.0 * w * 0.5 * c / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn identity_solve() {
        let sys = DesignSystem::from_parts(
            DMatrix::identity(3, 3),
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            1.0,
            3,
        )
        .unwrap();
        let (coef, diag) = solve(&sys, DEFAULT_MASS_FLOOR, DEFAULT_RIDGE_REL).unwrap();
        assert_eq!(coef.as_slice(), &[1.0, 0.0, 0.0]);
        assert!(!diag.ridge_applied);
        assert_eq!(diag.ridge_magnitude, 0.0);
    }

    #[test]
    fn reproduces_hyperplane() {
        let s = line_sample(400);
        let bw = Bandwidth::new(0.15, vec![0.2]).unwrap();
        let (u, x) = (0.45, 0.55);
        let sys = assemble(&s, &KernelSpec::epanechnikov(), &bw, u, &[x], s.responses()).unwrap();
        let (coef, diag) = solve(&sys, DEFAULT_MASS_FLOOR, DEFAULT_RIDGE_REL).unwrap();
        assert!(!diag.ridge_applied);
        assert!((coef[0] - (2.0 + 3.0 * u + 4.0 * x)).abs() < 1e-10);
        assert!((coef[1] - 3.0 * 0.15).abs() < 1e-10);
        assert!((coef[2] - 4.0 * 0.2).abs() < 1e-10);
    }

    #[test]
    fn dense_least_squares_agrees() {
        // Direct weighted least squares through the normal equations of the full design.
        let s = line_sample(200);
        let y: Vec<f64> = s
            .times()
            .iter()
            .enumerate()
            .map(|(t, u)| (7.0 * u).sin() + s.x_row(t)[0].powi(2))
            .collect();
        let spec = KernelSpec::epanechnikov();
        let bw = Bandwidth::new(0.2, vec![0.25]).unwrap();
        let (u, x) = (0.6, 0.4);
        let rows: Vec<(f64, [f64; 3], f64)> = (0..s.len())
            .map(|t| {
                let w = spec
                    .product_weight(&bw, u, s.times()[t], &[x], s.x_row(t))
                    .unwrap();
                let d = [1.0, (s.times()[t] - u) / 0.2, (s.x_row(t)[0] - x) / 0.25];
                (w, d, y[t])
            })
            .filter(|r| r.0 > 0.0)
            .collect();
        let dm = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i].1[j] * rows[i].0.sqrt());
        let rhs = DVector::from_fn(rows.len(), |i, _| rows[i].2 * rows[i].0.sqrt());
        let expected = dm.svd(true, true).solve(&rhs, 1e-14).unwrap();

        let sys = assemble(&s, &spec, &bw, u, &[x], &y).unwrap();
        let (coef, _) = solve(&sys, DEFAULT_MASS_FLOOR, DEFAULT_RIDGE_REL).unwrap();
        for k in 0..3 {
            assert!((coef[k] - expected[k]).abs() < 1e-9, "{coef} vs {expected}");
        }
    }

    #[test]
    fn rank_deficient_uses_ridge() {
        let n = 50;
        let u: Vec<f64> = (1..=n).map(|t| t as f64 / n as f64).collect();
        let x = vec![vec![0.5]; n];
        let y: Vec<f64> = u.iter().map(|u| 1.0 + u).collect();
        let s = Sample::new(u, x, y, Domain::Target).unwrap();
        let bw = Bandwidth::new(0.3, vec![0.3]).unwrap();
        let sys = assemble(
            &s,
            &KernelSpec::epanechnikov(),
            &bw,
            0.5,
            &[0.45],
            s.responses(),
        )
        .unwrap();
        let (coef, diag) = solve(&sys, DEFAULT_MASS_FLOOR, DEFAULT_RIDGE_REL).unwrap();
        assert!(diag.ridge_applied);
        assert!(diag.ridge_magnitude > 0.0);
        assert!(coef.iter().all(|v| v.is_finite()));

        let pinv = sys.gram.clone().pseudo_inverse(1e-12).unwrap();
        let oracle = pinv * &sys.moment;
        // The fitted value at the query is identified even though the slopes are not.
        let fitted = |c: &DVector<f64>| c[0] + c[2] * (0.5 - 0.45) / 0.3;
        assert!((fitted(&coef) - fitted(&oracle)).abs() < 1e-6);
        assert!((fitted(&coef) - 1.5).abs() < 1e-6);
    }

    #[test]
    fn eigenvalue_examples() {
        let sys = |m: DMatrix<f64>| {
            let p = m.nrows();
            DesignSystem::from_parts(m, DVector::zeros(p), 1.0, 1).unwrap()
        };
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        assert_relative_eq!(
            min_eigenvalue(&sys(diag)).unwrap(),
            1.0,
            max_relative = 1e-8
        );
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_relative_eq!(min_eigenvalue(&sys(m)).unwrap(), 1.0, max_relative = 1e-8);
        assert_eq!(min_eigenvalue(&sys(DMatrix::zeros(3, 3))).unwrap(), 0.0);
        let mut bad = DMatrix::zeros(2, 2);
        bad[(0, 0)] = f64::NAN;
        assert!(matches!(min_eigenvalue(&sys(bad)), Err(Error::Numeric(_))));
    }

    #[test]
    fn gram_matches_rowwise_sum() {
        let s = line_sample(300);
        let spec = KernelSpec::epanechnikov();
        let bw = Bandwidth::new(0.1, vec![0.3]).unwrap();
        let (u, x) = (0.3, 0.6);
        let sys = assemble(&s, &spec, &bw, u, &[x], s.responses()).unwrap();
        let mut brute = DMatrix::<f64>::zeros(3, 3);
        for t in 0..s.len() {
            let w = spec
                .product_weight(&bw, u, s.times()[t], &[x], s.x_row(t))
                .unwrap();
            let d = DVector::from_vec(vec![
                1.0,
                (s.times()[t] - u) / 0.1,
                (s.x_row(t)[0] - x) / 0.3,
            ]);
            brute += w * &d * d.transpose();
        }
        brute /= s.len() as f64;
        for (a, b) in sys.gram.iter().zip(brute.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
        assert_eq!(sys.gram, sys.gram.transpose());
    }

    #[test]
    fn interior_conditioning_on_dense_design() {
        let side = 60;
        let n = side * side;
        let u: Vec<f64> = (1..=n).map(|t| t as f64 / n as f64).collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|t| vec![(t % side) as f64 / (side - 1) as f64])
            .collect();
        let s = Sample::new(u, x, vec![0.0; n], Domain::Target).unwrap();
        let bw = Bandwidth::uniform(0.1, 1).unwrap();
        for i in 1..10 {
            for j in 1..10 {
                let (qu, qx) = (i as f64 / 10.0, j as f64 / 10.0);
                let sys = assemble(
                    &s,
                    &KernelSpec::epanechnikov(),
                    &bw,
                    qu,
                    &[qx],
                    s.responses(),
                )
                .unwrap();
                assert!(min_eigenvalue(&sys).unwrap() > 0.0);
            }
        }
    }
}
