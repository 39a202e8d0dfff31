//! Simulation settings and their flat `key = value` file format.

use std::collections::HashSet;

use super::surfaces::BiasKind;
use crate::error::{Error, Result};

/// Keys accepted in a configuration file.
pub const CONFIG_KEYS: [&str; 10] = [
    "t0",
    "t1",
    "noise_sd",
    "gamma_min",
    "gamma_max",
    "gamma_step",
    "families",
    "replications",
    "grid_n",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t0: usize,
    pub t1: usize,
    pub noise_sd: f64,
    pub gamma_sweep: Vec<f64>,
    pub families: Vec<BiasKind>,
    pub replications: usize,
    pub grid_n: usize,
    pub base_seed: u64,
}

impl Default for SimConfig {
    /// Desk scale: 500 target and 5000 source points, 20 replications.
    fn default() -> Self {
        Self {
            t0: 500,
            t1: 5000,
            noise_sd: 0.1,
            gamma_sweep: gamma_range(-10.0, 10.0, 2.0).expect("valid default sweep"),
            families: BiasKind::ALL.to_vec(),
            replications: 20,
            grid_n: 50,
            base_seed: 1,
        }
    }
}

impl SimConfig {
    /// 2000 target and 20000 source points, 50 replications.
    pub fn full_scale() -> Self {
        Self {
            t0: 2000,
            t1: 20_000,
            replications: 50,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t0 < 10 || self.t1 < self.t0 {
            return Err(Error::InvalidInput(format!(
                "need t1 >= t0 >= 10, got t0 = {}, t1 = {}",
                self.t0, self.t1
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidInput(
                "replications must be at least 1".into(),
            ));
        }
        if self.grid_n < 2 {
            return Err(Error::InvalidInput("grid_n must be at least 2".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise_sd must be finite and nonnegative, got {}",
                self.noise_sd
            )));
        }
        if self.gamma_sweep.is_empty() || self.gamma_sweep.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidInput(
                "gamma sweep must be a nonempty list of finite values".into(),
            ));
        }
        if self.families.is_empty() {
            return Err(Error::InvalidInput(
                "at least one bias family is required".into(),
            ));
        }
        Ok(())
    }
}

/// `min, min + step, ...` up to `max` inclusive.
pub fn gamma_range(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) || min > max {
        return Err(Error::InvalidInput(format!(
            "invalid gamma range [{min}, {max}] with step {step}"
        )));
    }
    if min == max {
        return Ok(vec![min]);
    }
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!(
            "gamma step must be positive, got {step}"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| min + k as f64 * step).collect())
}

/// Parses a configuration file on top of `base`.
///
/// One `key = value` pair per line; blank lines and text after `#` are ignored.
/// `families` is a comma-separated list.
pub fn parse_config(text: &str, base: SimConfig) -> Result<SimConfig> {
    let mut cfg = base;
    let (mut g_min, mut g_max, mut g_step) = (None, None, None);
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |key: &str, message: String| Error::Config {
            line,
            key: key.to_string(),
            message,
        };
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err("", "expected `key = value`".into()))?;
        if !CONFIG_KEYS.contains(&key) {
            return Err(err(key, "unknown key".into()));
        }
        if !seen.insert(key.to_string()) {
            return Err(err(key, "duplicate key".into()));
        }
        let count = || {
            value.parse::<usize>().map_err(|_| {
                err(
                    key,
                    format!("expected a nonnegative integer, got '{value}'"),
                )
            })
        };
        let real = || {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(key, format!("expected a finite number, got '{value}'")))
        };
        match key {
            "t0" => cfg.t0 = count()?,
            "t1" => cfg.t1 = count()?,
            "noise_sd" => cfg.noise_sd = real()?,
            "gamma_min" => g_min = Some(real()?),
            "gamma_max" => g_max = Some(real()?),
            "gamma_step" => g_step = Some(real()?),
            "replications" => cfg.replications = count()?,
            "grid_n" => cfg.grid_n = count()?,
            "seed" => {
                cfg.base_seed = value.parse::<u64>().map_err(|_| {
                    err(
                        key,
                        format!("expected an unsigned 64-bit integer, got '{value}'"),
                    )
                })?
            }
            "families" => {
                cfg.families = value
                    .split(',')
                    .map(|f| f.parse::<BiasKind>().map_err(|e| err(key, e.to_string())))
                    .collect::<Result<_>>()?
            }
            _ => unreachable!("key checked against CONFIG_KEYS"),
        }
    }
    if g_min.is_some() || g_max.is_some() || g_step.is_some() {
        let current_min = cfg
            .gamma_sweep
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let current_max = cfg
            .gamma_sweep
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let step = g_step.unwrap_or_else(|| {
            if cfg.gamma_sweep.len() > 1 {
                cfg.gamma_sweep[1] - cfg.gamma_sweep[0]
            } else {
                1.0
            }
        });
        cfg.gamma_sweep = gamma_range(
            g_min.unwrap_or(current_min),
            g_max.unwrap_or(current_max),
            step,
        )
        .map_err(|e| Error::Config {
            line: 0,
            key: "gamma_min/gamma_max/gamma_step".into(),
            message: e.to_string(),
        })?;
    }
    Ok(cfg)
}
