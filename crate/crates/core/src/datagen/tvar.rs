//! Time-varying AR(2) covariates.

use std::f64::consts::PI;

use super::rng::Rng;
use crate::error::{Error, Result};

/// Points of the `u`-grid on which stability is checked.
const STABILITY_GRID: usize = 10_000;

pub fn coeff_a1(u: f64) -> f64 {
    0.15 * (PI / 3.0).cos() + 0.3 * ((u - 0.5).powi(2) - 1.0 / 12.0)
}

pub fn coeff_a2(u: f64) -> f64 {
    0.15 * (2.0 * PI / 3.0).cos() + 0.3 * ((u - 0.5).powi(2) - 1.0 / 12.0)
}

pub fn vol_s(u: f64) -> f64 {
    (0.10 + 0.10 * (0.5 + 0.5 * (0.5 * PI * u).sin())).max(1e-3)
}

/// `x_t = a1(u_t) x_{t-1} + a2(u_t) x_{t-2} + s(u_t) zeta_t` with `u_t = t / T`.
#[derive(Debug, Clone, Copy)]
pub struct Tvar2Spec {
    a1: fn(f64) -> f64,
    a2: fn(f64) -> f64,
    s: fn(f64) -> f64,
    /// `(x_{-1}, x_0)`.
    x_init: (f64, f64),
}

impl Default for Tvar2Spec {
    fn default() -> Self {
        Self::new(coeff_a1, coeff_a2, vol_s, (0.0, 0.0)).expect("shipped coefficients are stable")
    }
}

impl Tvar2Spec {
    /// Rejects coefficient curves with `sup_u |a1(u)| + |a2(u)| >= 1`.
    pub fn new(
        a1: fn(f64) -> f64,
        a2: fn(f64) -> f64,
        s: fn(f64) -> f64,
        x_init: (f64, f64),
    ) -> Result<Self> {
        let spec = Self { a1, a2, s, x_init };
        let sup = spec.stability_sup();
        if !(sup < 1.0) {
            return Err(Error::InvalidInput(format!(
                "tvAR(2) coefficients are not stable: sup |a1| + |a2| = {sup}"
            )));
        }
        if !(x_init.0.is_finite() && x_init.1.is_finite()) {
            return Err(Error::InvalidInput("initial values must be finite".into()));
        }
        Ok(spec)
    }

    /// `max |a1(u)| + |a2(u)|` over a uniform grid of `[0, 1]`.
    pub fn stability_sup(&self) -> f64 {
        (0..=STABILITY_GRID)
            .map(|k| {
                let u = k as f64 / STABILITY_GRID as f64;
                (self.a1)(u).abs() + (self.a2)(u).abs()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn a1(&self, u: f64) -> f64 {
        (self.a1)(u)
    }

    pub fn a2(&self, u: f64) -> f64 {
        (self.a2)(u)
    }

    pub fn s(&self, u: f64) -> f64 {
        (self.s)(u)
    }
}

/// Runs the recursion for `t = 1..=T`, drawing one standard normal per step.
pub fn simulate_tvar2(spec: &Tvar2Spec, len: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::InvalidInput("series length must be positive".into()));
    }
    let mut out = Vec::with_capacity(len);
    let (mut prev2, mut prev1) = spec.x_init;
    for t in 1..=len {
        let u = t as f64 / len as f64;
        let x = spec.a1(u) * prev1 + spec.a2(u) * prev2 + spec.s(u) * rng.standard_normal();
        out.push(x);
        prev2 = prev1;
        prev1 = x;
    }
    Ok(out)
}

/// Min-max rescaling onto `[0, 1]`.
pub fn rescale_unit(series: &[f64]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::EmptyInput("series"));
    }
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) || !(hi - lo).is_finite() {
        return Err(Error::Degenerate("series has zero spread".into()));
    }
    Ok(series.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert!((coeff_a1(0.5) - 0.05).abs() < 1e-15);
        assert!((coeff_a2(0.5) + 0.10).abs() < 1e-15);
        assert!((vol_s(0.0) - 0.15).abs() < 1e-15);
        assert!((vol_s(1.0) - 0.20).abs() < 1e-15);
    }

    #[test]
    fn shipped_coefficients_are_stable() {
        let sup = Tvar2Spec::default().stability_sup();
        // direct evaluation: both coefficients keep their sign on [0, 1], so the sum of
        // absolute values is a1 - a2 = 0.15 everywhere
        assert!((sup - 0.15).abs() < 1e-12, "{sup}");
        assert!(Tvar2Spec::new(|_| 0.6, |_| -0.5, vol_s, (0.0, 0.0)).is_err());
    }

    #[test]
    fn zero_volatility_stays_at_zero() {
        let spec = Tvar2Spec::new(coeff_a1, coeff_a2, |_| 0.0, (0.0, 0.0)).unwrap();
        let x = simulate_tvar2(&spec, 100, &mut Rng::new(3)).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn white_noise_passthrough() {
        let spec = Tvar2Spec::new(|_| 0.0, |_| 0.0, |_| 1.0, (0.0, 0.0)).unwrap();
        let x = simulate_tvar2(&spec, 50, &mut Rng::new(9)).unwrap();
        let mut rng = Rng::new(9);
        for v in x {
            assert_eq!(v, rng.standard_normal());
        }
    }

    #[test]
    fn regeneration_is_bitwise_identical() {
        let spec = Tvar2Spec::default();
        let a = simulate_tvar2(&spec, 10, &mut Rng::new(11).split(4)).unwrap();
        let b = simulate_tvar2(&spec, 10, &mut Rng::new(11).split(4)).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn rescale_examples() {
        assert_eq!(rescale_unit(&[2.0, 4.0, 6.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(rescale_unit(&[0.0, 0.3, 1.0]).unwrap(), vec![0.0, 0.3, 1.0]);
        assert!(matches!(
            rescale_unit(&[5.0, 5.0]),
            Err(Error::Degenerate(_))
        ));
    }

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (
            m,
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0),
        )
    }

    #[test]
    fn locally_matches_frozen_process() {
        let len = 100_000;
        let u_star = 0.5;
        let tv = simulate_tvar2(&Tvar2Spec::default(), len, &mut Rng::new(5).split(0)).unwrap();
        let window: Vec<f64> = tv
            .iter()
            .enumerate()
            .filter(|(t, _)| ((t + 1) as f64 / len as f64 - u_star).abs() <= 0.02)
            .map(|(_, &x)| x)
            .collect();

        let mut rng = Rng::new(5).split(1);
        let (a1, a2, s) = (coeff_a1(u_star), coeff_a2(u_star), vol_s(u_star));
        let (mut p2, mut p1) = (0.0, 0.0);
        let frozen: Vec<f64> = (0..len)
            .map(|_| {
                let x = a1 * p1 + a2 * p2 + s * rng.standard_normal();
                p2 = p1;
                p1 = x;
                x
            })
            .collect();

        let (m_w, v_w) = mean_var(&window);
        let (m_f, v_f) = mean_var(&frozen[1000..]);
        // autocorrelations of the frozen AR(2) give the standard errors of both moments
        let mut rho = vec![1.0, a1 / (1.0 - a2)];
        for k in 2..200 {
            rho.push(a1 * rho[k - 1] + a2 * rho[k - 2]);
        }
        let mean_factor = 1.0 + 2.0 * rho[1..].iter().sum::<f64>();
        let var_factor = 1.0 + 2.0 * rho[1..].iter().map(|r| r * r).sum::<f64>();
        let (n_w, n_f) = (window.len() as f64, (len - 1000) as f64);
        let se_mean = (mean_factor * (v_w / n_w + v_f / n_f)).sqrt();
        let se_var = (2.0 * var_factor * (v_w * v_w / n_w + v_f * v_f / n_f)).sqrt();
        assert!((m_w - m_f).abs() < 3.0 * se_mean, "means {m_w} vs {m_f}");
        assert!((v_w - v_f).abs() < 3.0 * se_var, "variances {v_w} vs {v_f}");
    }
}
