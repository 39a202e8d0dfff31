use std::ops::Range;

use crate::error::{Error, Result};

/// Which side of a transfer problem a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Target,
    Source,
}

/// Observations `(u_t, x_t, y_t)` from one domain, ordered by rescaled time.
///
/// Covariates are stored row-major: row `t` occupies `x[t * dim..(t + 1) * dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    u: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    dim: usize,
    domain: Domain,
}

impl Sample {
    /// Builds a sample from covariate rows. `u` must be nondecreasing and inside `[0, 1]`.
    pub fn new(u: Vec<f64>, x: Vec<Vec<f64>>, y: Vec<f64>, domain: Domain) -> Result<Self> {
        let dim = x.first().map_or(0, Vec::len);
        if x.iter().any(|row| row.len() != dim) {
            return Err(Error::Shape("covariate rows have unequal lengths".into()));
        }
        if x.len() != u.len() {
            return Err(Error::Shape(format!(
                "{} time points but {} covariate rows",
                u.len(),
                x.len()
            )));
        }
        Self::from_flat(u, x.into_iter().flatten().collect(), dim, y, domain)
    }

    /// Builds a sample from a row-major covariate buffer with `dim` columns.
    pub fn from_flat(
        u: Vec<f64>,
        x: Vec<f64>,
        dim: usize,
        y: Vec<f64>,
        domain: Domain,
    ) -> Result<Self> {
        let n = u.len();
        if n == 0 {
            return Err(Error::EmptyInput("sample"));
        }
        if y.len() != n || x.len() != n * dim {
            return Err(Error::Shape(format!(
                "u has {n} entries, y has {}, x has {} (dim {dim})",
                y.len(),
                x.len()
            )));
        }
        if u.iter().chain(&x).chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "sample contains non-finite values".into(),
            ));
        }
        if u.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidInput(
                "rescaled time must lie in [0, 1]".into(),
            ));
        }
        if u.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput(
                "rescaled time must be nondecreasing".into(),
            ));
        }
        Ok(Self {
            u,
            x,
            y,
            dim,
            domain,
        })
    }

    /// A series of length `T` observed at `u_t = t / T`, `t = 1..=T`.
    pub fn from_series(x: Vec<Vec<f64>>, y: Vec<f64>, domain: Domain) -> Result<Self> {
        let n = x.len();
        let u = rescaled_times(n);
        Self::new(u, x, y, domain)
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Number of covariates.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn times(&self) -> &[f64] {
        &self.u
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    pub fn covariates_flat(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn x_row(&self, t: usize) -> &[f64] {
        &self.x[t * self.dim..(t + 1) * self.dim]
    }

    /// Column `j` of the covariate matrix.
    pub fn covariate(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.x.iter().skip(j).step_by(self.dim.max(1)).copied()
    }

    /// `(min, max)` of covariate `j`.
    pub fn covariate_range(&self, j: usize) -> (f64, f64) {
        self.covariate(j)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Indices whose time lies in `[lo, hi]`; contiguous because `u` is sorted.
    #[inline]
    pub fn time_window(&self, lo: f64, hi: f64) -> Range<usize> {
        let start = self.u.partition_point(|&v| v < lo);
        let end = self.u.partition_point(|&v| v <= hi);
        start..end.max(start)
    }

    /// Same design, new responses.
    pub fn with_responses(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.len() {
            return Err(Error::Shape(format!(
                "expected {} responses, got {}",
                self.len(),
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("responses must be finite".into()));
        }
        Ok(Self { y, ..self.clone() })
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    /// The observations at `indices`, in the given (increasing) order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut x = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            x.extend_from_slice(self.x_row(i));
        }
        Self::from_flat(
            indices.iter().map(|&i| self.u[i]).collect(),
            x,
            self.dim,
            indices.iter().map(|&i| self.y[i]).collect(),
            self.domain,
        )
    }
}

/// `t / n` for `t = 1..=n`.
pub fn rescaled_times(n: usize) -> Vec<f64> {
    (1..=n).map(|t| t as f64 / n as f64).collect()
}
