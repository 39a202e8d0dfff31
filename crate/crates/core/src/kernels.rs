//! Compactly supported smoothing kernels and the product weights built from them.
//!
//! Every estimator in the crate weights an observation at `(t/T, X_t)` relative to a
//! query `(u, x)` by
//!
//! ```text
//! K_h(u - t/T) * prod_j K_h(x^j - X^j_t),    K_h(v) = K(v / h) / h
//! ```
//!
//! with one bandwidth for the time axis and one per covariate axis.

use crate::error::{Error, Result};

/// Kernel shape. Only compactly supported, symmetric, bounded kernels belong here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// `(3/4)(1 - v^2)` on `[-1, 1]`.
    Epanechnikov,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    support_radius: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::epanechnikov()
    }
}

impl KernelSpec {
    /// The Epanechnikov kernel with unit support radius.
    pub const fn epanechnikov() -> Self {
        Self {
            family: KernelFamily::Epanechnikov,
            support_radius: 1.0,
        }
    }

    /// A kernel stretched to `[-support_radius, support_radius]`, still integrating to one.
    pub fn new(family: KernelFamily, support_radius: f64) -> Result<Self> {
        if !(support_radius.is_finite() && support_radius > 0.0) {
            return Err(Error::InvalidInput(format!(
                "support radius must be positive and finite, got {support_radius}"
            )));
        }
        Ok(Self {
            family,
            support_radius,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// `K(v)`; zero outside the support.
    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        let r = self.support_radius;
        let s = v / r;
        if s.abs() > 1.0 {
            return 0.0;
        }
        match self.family {
            KernelFamily::Epanechnikov => 0.75 * (1.0 - s * s) / r,
        }
    }

    /// `K_h(v) = K(v/h) / h`.
    pub fn scaled(&self, h: f64, v: f64) -> Result<f64> {
        check_width(h)?;
        Ok(self.eval(v / h) / h)
    }

    /// Product weight of an observation relative to a query.
    pub fn product_weight(
        &self,
        bw: &Bandwidth,
        u_query: f64,
        u_obs: f64,
        x_query: &[f64],
        x_obs: &[f64],
    ) -> Result<f64> {
        if x_query.len() != bw.dim() || x_obs.len() != bw.dim() {
            return Err(Error::Shape(format!(
                "bandwidth has {} covariate axes, query has {}, observation has {}",
                bw.dim(),
                x_query.len(),
                x_obs.len()
            )));
        }
        Ok(self.weight_unchecked(bw, u_query, u_obs, x_query, x_obs))
    }

    /// Same as [`KernelSpec::product_weight`] without the dimension check.
    #[inline]
    pub(crate) fn weight_unchecked(
        &self,
        bw: &Bandwidth,
        u_query: f64,
        u_obs: f64,
        x_query: &[f64],
        x_obs: &[f64],
    ) -> f64 {
        let mut w = self.eval((u_query - u_obs) / bw.h_time) / bw.h_time;
        if w == 0.0 {
            return 0.0;
        }
        for ((&q, &o), &h) in x_query.iter().zip(x_obs).zip(&bw.h_cov) {
            let k = self.eval((q - o) / h);
            if k == 0.0 {
                return 0.0;
            }
            w *= k / h;
        }
        w
    }
}

fn check_width(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(format!(
            "bandwidth must be positive and finite, got {h}"
        )))
    }
}

/// Per-axis smoothing widths: one for rescaled time, one per covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct Bandwidth {
    h_time: f64,
    h_cov: Vec<f64>,
}

impl Bandwidth {
    pub fn new(h_time: f64, h_cov: Vec<f64>) -> Result<Self> {
        check_width(h_time)?;
        for &h in &h_cov {
            check_width(h)?;
        }
        Ok(Self { h_time, h_cov })
    }

    /// The same width on the time axis and on each of `dim` covariate axes.
    pub fn uniform(h: f64, dim: usize) -> Result<Self> {
        Self::new(h, vec![h; dim])
    }

    pub fn h_time(&self) -> f64 {
        self.h_time
    }

    pub fn h_cov(&self) -> &[f64] {
        &self.h_cov
    }

    /// Number of covariate axes.
    pub fn dim(&self) -> usize {
        self.h_cov.len()
    }

    /// Width of axis `k`, where axis 0 is time and axis `j + 1` is covariate `j`.
    pub fn axis(&self, k: usize) -> f64 {
        if k == 0 {
            self.h_time
        } else {
            self.h_cov[k - 1]
        }
    }
}

impl std::fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(h_time = {}", self.h_time)?;
        for (j, h) in self.h_cov.iter().enumerate() {
            write!(f, ", h_x{} = {}", j + 1, h)?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn epanechnikov_values() {
        let k = KernelSpec::epanechnikov();
        assert_eq!(k.eval(0.0), 0.75);
        assert_eq!(k.eval(1.5), 0.0);
        assert_eq!(k.eval(0.5), 0.5625);
        assert_eq!(k.eval(1.0), 0.0);
        assert_eq!(k.eval(-1.0000001), 0.0);
    }

    #[test]
    fn scaled_values() {
        let k = KernelSpec::epanechnikov();
        assert_eq!(k.scaled(0.5, 0.0).unwrap(), 1.5);
        assert_eq!(k.scaled(1.0, 0.0).unwrap(), 0.75);
        assert_eq!(k.scaled(0.1, 0.2).unwrap(), 0.0);
        assert!(matches!(
            k.scaled(0.0, 0.1),
            Err(Error::InvalidBandwidth(_))
        ));
        assert!(matches!(
            k.scaled(-1.0, 0.1),
            Err(Error::InvalidBandwidth(_))
        ));
    }

    #[test]
    fn product_weight_examples() {
        let k = KernelSpec::epanechnikov();
        let bw = Bandwidth::uniform(0.5, 1).unwrap();
        let w = k.product_weight(&bw, 0.3, 0.3, &[0.2], &[0.2]).unwrap();
        assert_eq!(w, 2.25);
        assert_eq!(
            k.product_weight(&bw, 0.3, 0.3, &[0.2], &[0.8]).unwrap(),
            0.0
        );

        let time_only = Bandwidth::new(0.5, vec![]).unwrap();
        assert_eq!(
            k.product_weight(&time_only, 0.3, 0.4, &[], &[]).unwrap(),
            k.scaled(0.5, -0.1).unwrap()
        );
        assert!(matches!(
            k.product_weight(&bw, 0.3, 0.3, &[0.2, 0.1], &[0.2]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn integrates_to_one() {
        for radius in [1.0, 0.3, 2.5] {
            let k = KernelSpec::new(KernelFamily::Epanechnikov, radius).unwrap();
            let n = 100_000;
            let step = 2.0 * radius / n as f64;
            let mut total = 0.0;
            for i in 0..=n {
                let v = -radius + i as f64 * step;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                total += w * k.eval(v);
            }
            assert!(
                (total * step - 1.0).abs() < 1e-6,
                "radius {radius}: {}",
                total * step
            );
        }
    }

    #[test]
    fn rejects_bad_bandwidths() {
        assert!(Bandwidth::new(f64::NAN, vec![0.1]).is_err());
        assert!(Bandwidth::new(0.1, vec![0.0]).is_err());
        assert!(Bandwidth::new(f64::INFINITY, vec![]).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_supported(v in -3.0f64..3.0) {
            let k = KernelSpec::epanechnikov();
            prop_assert_eq!(k.eval(v), k.eval(-v));
            if v.abs() > 1.0 {
                prop_assert_eq!(k.eval(v), 0.0);
            } else if v.abs() < 1.0 {
                prop_assert!(k.eval(v) > 0.0);
            }
        }

        #[test]
        fn product_factorizes(
            ht in 0.01f64..1.0, hx1 in 0.01f64..1.0, hx2 in 0.01f64..1.0,
            uq in 0.0f64..1.0, uo in 0.0f64..1.0,
            xq in proptest::collection::vec(0.0f64..1.0, 2),
            xo in proptest::collection::vec(0.0f64..1.0, 2),
        ) {
            let k = KernelSpec::epanechnikov();
            let bw = Bandwidth::new(ht, vec![hx1, hx2]).unwrap();
            let expected = k.scaled(ht, uq - uo).unwrap()
                * k.scaled(hx1, xq[0] - xo[0]).unwrap()
                * k.scaled(hx2, xq[1] - xo[1]).unwrap();
            let got = k.product_weight(&bw, uq, uo, &xq, &xo).unwrap();
            prop_assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }
}
