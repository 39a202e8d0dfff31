//! Simulation design: tvAR(2) covariates, the target surface, bias families, and the
//! replication sweep.

pub mod config;
pub mod rng;
pub mod surfaces;
pub mod sweep;
pub mod tvar;

pub use config::{gamma_range, parse_config, SimConfig, CONFIG_KEYS};
pub use rng::Rng;
pub use surfaces::{bias_eval, target_surface, BiasFamily, BiasKind};
pub use sweep::{generate_pair, run_sweep, EstimatorId};
pub use tvar::{coeff_a1, coeff_a2, rescale_unit, simulate_tvar2, vol_s, Tvar2Spec};
