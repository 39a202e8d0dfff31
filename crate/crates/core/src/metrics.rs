//! Evaluation grids, fitted surfaces and the error summaries computed on them.

use std::io::Write;

use crate::error::{Error, Result};

/// A regular grid over `u_range x x_ranges[0] x ...` with `n` nodes per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    n: usize,
    u_range: (f64, f64),
    x_ranges: Vec<(f64, f64)>,
}

impl GridSpec {
    pub fn new(n: usize, u_range: (f64, f64), x_ranges: Vec<(f64, f64)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("grid needs n >= 2, got {n}")));
        }
        for &(lo, hi) in std::iter::once(&u_range).chain(&x_ranges) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidInput(format!(
                    "invalid grid range [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self {
            n,
            u_range,
            x_ranges,
        })
    }

    /// `n x n` nodes on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, (0.0, 1.0), vec![(0.0, 1.0)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.x_ranges.len()
    }

    pub fn u_range(&self) -> (f64, f64) {
        self.u_range
    }

    pub fn x_ranges(&self) -> &[(f64, f64)] {
        &self.x_ranges
    }

    pub fn n_cells(&self) -> usize {
        self.n.pow(self.dim() as u32 + 1)
    }

    fn axis_range(&self, k: usize) -> (f64, f64) {
        if k == 0 {
            self.u_range
        } else {
            self.x_ranges[k - 1]
        }
    }

    /// Coordinate of node `i` on axis `k` (axis 0 is time).
    pub fn node(&self, k: usize, i: usize) -> f64 {
        let (lo, hi) = self.axis_range(k);
        if i + 1 == self.n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (self.n - 1) as f64
        }
    }

    /// `(u, x)` of the cell with flat index `idx`; time is the slowest axis.
    pub fn point(&self, idx: usize) -> (f64, Vec<f64>) {
        let d = self.dim();
        let mut rest = idx;
        let mut coords = vec![0.0; d + 1];
        for k in (0..=d).rev() {
            coords[k] = self.node(k, rest % self.n);
            rest /= self.n;
        }
        let u = coords[0];
        coords.remove(0);
        (u, coords)
    }
}

/// Predictions on a grid; `None` marks cells where the estimator had no data.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub grid: GridSpec,
    pub values: Vec<Option<f64>>,
}

impl Surface {
    pub fn new(grid: GridSpec, values: Vec<Option<f64>>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::Shape(format!(
                "grid has {} cells, got {} values",
                grid.n_cells(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Value at node `(i, j)` of a time-by-covariate surface.
    pub fn at(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.grid.n() + j]
    }

    pub fn n_missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

/// Writes `u,x,value,missing_flag` (or `u,x1,..,xd,..` for several covariates) with one
/// row per grid cell; missing cells have an empty value and flag 1.
pub fn write_surface<W: Write>(out: W, surface: &Surface) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv {
        path: "<surface>".into(),
        message: e.to_string(),
    };
    let d = surface.grid.dim();
    let mut header = vec!["u".to_string()];
    if d == 1 {
        header.push("x".into());
    } else {
        header.extend((1..=d).map(|j| format!("x{j}")));
    }
    header.extend(["value".into(), "missing_flag".into()]);
    w.write_record(&header).map_err(csv_err)?;
    for (idx, value) in surface.values.iter().enumerate() {
        let (u, x) = surface.grid.point(idx);
        let mut rec = vec![u.to_string()];
        rec.extend(x.iter().map(f64::to_string));
        rec.push(value.map(|v| v.to_string()).unwrap_or_default());
        rec.push(if value.is_some() { "0" } else { "1" }.into());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Fractional node position of `v` along axis `k`, snapped onto nodes within 1e-9.
fn locate(grid: &GridSpec, k: usize, v: f64) -> Option<(usize, f64)> {
    let (lo, hi) = grid.axis_range(k);
    let span = (grid.n() - 1) as f64;
    let mut pos = (v - lo) / (hi - lo) * span;
    if (pos - pos.round()).abs() < 1e-9 {
        pos = pos.round();
    }
    if !(0.0..=span).contains(&pos) {
        return None;
    }
    let i = (pos.floor() as usize).min(grid.n() - 2);
    Some((i, pos - i as f64))
}

/// Bilinear interpolation of a time-by-covariate surface.
///
/// Returns `Ok(None)` when a corner carrying positive weight is missing.
pub fn bilinear_interp(surface: &Surface, u: f64, x: f64) -> Result<Option<f64>> {
    let grid = &surface.grid;
    if grid.dim() != 1 {
        return Err(Error::Shape(format!(
            "bilinear interpolation needs one covariate axis, surface has {}",
            grid.dim()
        )));
    }
    let ((i, fu), (j, fx)) = match (locate(grid, 0, u), locate(grid, 1, x)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::InvalidInput(format!(
                "point ({u}, {x}) lies outside the surface grid"
            )))
        }
    };
    let corners = [
        ((i, j), (1.0 - fu) * (1.0 - fx)),
        ((i + 1, j), fu * (1.0 - fx)),
        ((i, j + 1), (1.0 - fu) * fx),
        ((i + 1, j + 1), fu * fx),
    ];
    let mut total = 0.0;
    for ((a, b), w) in corners {
        if w == 0.0 {
            continue;
        }
        match surface.at(a, b) {
            Some(v) => total += w * v,
            None => return Ok(None),
        }
    }
    Ok(Some(total))
}

/// Lower median: the `(k - 1) / 2`-th order statistic of `k` values.
pub fn lower_median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let k = (values.len() - 1) / 2;
    let (_, m, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    Some(*m)
}

/// Median over `grid` of the squared error between `est` and `truth`.
///
/// Returns the median together with the number of cells that could not be evaluated.
pub fn grid_median_error(
    est: &Surface,
    truth: impl Fn(f64, f64) -> f64,
    grid: &GridSpec,
) -> Result<(f64, usize)> {
    if grid.dim() != 1 {
        return Err(Error::Shape(
            "grid median error is defined for one covariate".into(),
        ));
    }
    let mut errors = Vec::with_capacity(grid.n_cells());
    let mut missing = 0;
    for i in 0..grid.n() {
        let u = grid.node(0, i);
        for j in 0..grid.n() {
            let x = grid.node(1, j);
            match bilinear_interp(est, u, x)? {
                Some(v) => errors.push((v - truth(u, x)).powi(2)),
                None => missing += 1,
            }
        }
    }
    let median = lower_median(&mut errors).ok_or(Error::NoData)?;
    Ok((median, missing))
}

/// Root mean squared error and maximum absolute error.
pub fn test_losses(predictions: &[f64], actuals: &[f64]) -> Result<(f64, f64)> {
    if predictions.is_empty() || actuals.is_empty() {
        return Err(Error::EmptyInput("loss vectors"));
    }
    if predictions.len() != actuals.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} actuals",
            predictions.len(),
            actuals.len()
        )));
    }
    let (mut ss, mut max) = (0.0, 0.0f64);
    for (p, a) in predictions.iter().zip(actuals) {
        let e = p - a;
        ss += e * e;
        max = max.max(e.abs());
    }
    Ok(((ss / predictions.len() as f64).sqrt(), max))
}

/// Least-squares slope of `log_err` on `log_t`.
pub fn rate_slope(log_t: &[f64], log_err: &[f64]) -> Result<f64> {
    if log_t.len() != log_err.len() {
        return Err(Error::Shape("abscissa and ordinate lengths differ".into()));
    }
    if log_t.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 points for a slope, got {}",
            log_t.len()
        )));
    }
    let n = log_t.len() as f64;
    let mx = log_t.iter().sum::<f64>() / n;
    let my = log_err.iter().sum::<f64>() / n;
    let sxx: f64 = log_t.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = log_t
        .iter()
        .zip(log_err)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    if !(sxx > 1e-12 * log_t.iter().map(|x| x * x).sum::<f64>().max(1e-300)) {
        return Err(Error::Degenerate("abscissa has no spread".into()));
    }
    Ok(sxy / sxx)
}

/// Per-replication grid-median errors of one estimator at one `(family, gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub estimator_id: String,
    pub family: String,
    pub gamma: f64,
    /// `(replication index, median squared error, missing cells)`.
    pub replications: Vec<(usize, f64, usize)>,
    /// Replications that failed and were dropped.
    pub n_failed: usize,
}

impl ErrorReport {
    pub fn per_replication_median(&self) -> Vec<f64> {
        self.replications.iter().map(|r| r.1).collect()
    }

    pub fn mean_of_medians(&self) -> f64 {
        let n = self.replications.len();
        if n == 0 {
            return f64::NAN;
        }
        self.replications.iter().map(|r| r.1).sum::<f64>() / n as f64
    }

    pub fn n_missing_cells(&self) -> usize {
        self.replications.iter().map(|r| r.2).sum()
    }
}

pub const ERROR_REPORT_HEADER: [&str; 6] = [
    "estimator",
    "family",
    "gamma",
    "replication",
    "median_sq_err",
    "n_missing",
];

/// Writes one row per replication, in report order.
pub fn write_error_reports<W: Write>(out: W, reports: &[ErrorReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv {
        path: "<error report>".into(),
        message: e.to_string(),
    };
    w.write_record(ERROR_REPORT_HEADER).map_err(csv_err)?;
    for r in reports {
        for &(rep, median, missing) in &r.replications {
            w.write_record([
                r.estimator_id.clone(),
                r.family.clone(),
                r.gamma.to_string(),
                rep.to_string(),
                median.to_string(),
                missing.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `estimator,family,gamma,mean_median_sq_err,n_replications,n_failed`.
pub fn write_error_summary<W: Write>(out: W, reports: &[ErrorReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv {
        path: "<error summary>".into(),
        message: e.to_string(),
    };
    w.write_record([
        "estimator",
        "family",
        "gamma",
        "mean_median_sq_err",
        "n_replications",
        "n_failed",
    ])
    .map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.estimator_id.clone(),
            r.family.clone(),
            r.gamma.to_string(),
            r.mean_of_medians().to_string(),
            r.replications.len().to_string(),
            r.n_failed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
