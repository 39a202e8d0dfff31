//! Target regression surface and the bias families added to the source.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::transfer::BiasSmoothness;

/// `m0(u, x) = 2 sin(pi x) (0.5 u + 2) + u (1 - x) + 2`.
pub fn target_surface(u: f64, x: f64) -> f64 {
    2.0 * (std::f64::consts::PI * x).sin() * (0.5 * u + 2.0) + u * (1.0 - x) + 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BiasKind {
    Quad,
    Cubic,
    Exp,
}

impl BiasKind {
    pub const ALL: [BiasKind; 3] = [BiasKind::Quad, BiasKind::Cubic, BiasKind::Exp];

    pub fn label(self) -> &'static str {
        match self {
            BiasKind::Quad => "quad",
            BiasKind::Cubic => "cubic",
            BiasKind::Exp => "exp",
        }
    }

    /// The family member with `gamma = 1`.
    pub fn shape(self, u: f64, x: f64) -> f64 {
        match self {
            BiasKind::Quad => (u * u + x * x) / 2.0,
            BiasKind::Cubic => (u.powi(3) + x.powi(3)) / 6.0,
            BiasKind::Exp => (u.exp() + x.exp()) / std::f64::consts::E,
        }
    }
}

impl fmt::Display for BiasKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BiasKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "quad" => Ok(BiasKind::Quad),
            "cubic" => Ok(BiasKind::Cubic),
            "exp" => Ok(BiasKind::Exp),
            other => Err(Error::InvalidInput(format!(
                "unknown bias family '{other}' (expected quad, cubic or exp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasFamily {
    pub kind: BiasKind,
    pub gamma: f64,
}

impl BiasFamily {
    pub fn new(kind: BiasKind, gamma: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "gamma must be finite, got {gamma}"
            )));
        }
        Ok(Self { kind, gamma })
    }

    /// `gamma (u^2 + x^2) / 2`, `gamma (u^3 + x^3) / 6` or `gamma (e^u + e^x) / e`.
    pub fn eval(&self, u: f64, x: f64) -> f64 {
        self.gamma * self.kind.shape(u, x)
    }

    /// Gradient and Hessian bounds over `[0, 1]^2`. All three families reach their
    /// suprema at `(1, 1)`, where the Hessian is `gamma * I`.
    pub fn smoothness(&self) -> BiasSmoothness {
        let g = self.gamma.abs();
        let eta1 = match self.kind {
            BiasKind::Quad | BiasKind::Exp => std::f64::consts::SQRT_2 * g,
            BiasKind::Cubic => std::f64::consts::SQRT_2 * g / 2.0,
        };
        BiasSmoothness {
            eta1,
            eta2: std::f64::consts::SQRT_2 * g,
        }
    }
}

pub fn bias_eval(fam: &BiasFamily, u: f64, x: f64) -> f64 {
    fam.eval(u, x)
}
