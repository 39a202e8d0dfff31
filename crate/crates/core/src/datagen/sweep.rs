//! Simulated pairs and the replication sweep over bias families and strengths.

use std::sync::Arc;

use rayon::prelude::*;

use super::config::SimConfig;
use super::rng::Rng;
use super::surfaces::{target_surface, BiasFamily, BiasKind};
use super::tvar::{rescale_unit, simulate_tvar2, Tvar2Spec};
use crate::bandwidth::{cv_select_shared, default_grid, DEFAULT_FOLDS};
use crate::error::{Error, Result};
use crate::estimators::{evaluate_surface, fit_surface, Method};
use crate::kernels::KernelSpec;
use crate::metrics::{grid_median_error, ErrorReport, GridSpec};
use crate::sample::{rescaled_times, Domain, Sample};
use crate::transfer::fit_transfer_select_bias;

/// Split indices below a replication stream.
const TARGET_STREAM: u64 = 0;
const SOURCE_STREAM: u64 = 1;
const COVARIATE_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorId {
    NwT,
    LlT,
    NwTl,
    LlTl,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 4] = [
        EstimatorId::NwT,
        EstimatorId::LlT,
        EstimatorId::NwTl,
        EstimatorId::LlTl,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EstimatorId::NwT => "NW-T",
            EstimatorId::LlT => "LL-T",
            EstimatorId::NwTl => "NW-TL",
            EstimatorId::LlTl => "LL-TL",
        }
    }

    pub fn method(self) -> Method {
        match self {
            EstimatorId::NwT | EstimatorId::NwTl => Method::Nw,
            EstimatorId::LlT | EstimatorId::LlTl => Method::Ll,
        }
    }

    pub fn is_transfer(self) -> bool {
        matches!(self, EstimatorId::NwTl | EstimatorId::LlTl)
    }
}

/// Covariates and scaled noise of one simulated domain; responses are added per family.
struct DomainDraw {
    u: Vec<f64>,
    x: Vec<f64>,
    noise: Vec<f64>,
    domain: Domain,
}

impl DomainDraw {
    fn new(cfg: &SimConfig, replication: usize, domain: Domain) -> Result<Self> {
        let (stream, len) = match domain {
            Domain::Target => (TARGET_STREAM, cfg.t0),
            Domain::Source => (SOURCE_STREAM, cfg.t1),
        };
        let root = Rng::new(cfg.base_seed).stream(&[replication as u64, stream]);
        let raw = simulate_tvar2(
            &Tvar2Spec::default(),
            len,
            &mut root.split(COVARIATE_STREAM),
        )?;
        let x = rescale_unit(&raw)?;
        let mut eta = root.split(NOISE_STREAM);
        let noise = (0..len)
            .map(|_| cfg.noise_sd * eta.standard_normal())
            .collect();
        Ok(Self {
            u: rescaled_times(len),
            x,
            noise,
            domain,
        })
    }

    fn responses(&self, bias: Option<&BiasFamily>) -> Vec<f64> {
        self.u
            .iter()
            .zip(&self.x)
            .zip(&self.noise)
            .map(|((&u, &x), e)| target_surface(u, x) + bias.map_or(0.0, |b| b.eval(u, x)) + e)
            .collect()
    }

    fn sample(&self, y: Vec<f64>) -> Result<Sample> {
        Sample::from_flat(self.u.clone(), self.x.clone(), 1, y, self.domain)
    }
}

/// Target and source samples of one replication.
///
/// The target responses are `m0 + noise`; the source responses add `fam`. Covariates and
/// noise come from streams keyed by `(base_seed, replication, domain)` only, so they do
/// not change with the family or its strength.
pub fn generate_pair(
    cfg: &SimConfig,
    fam: &BiasFamily,
    replication: usize,
) -> Result<(Sample, Sample)> {
    cfg.validate()?;
    let target = DomainDraw::new(cfg, replication, Domain::Target)?;
    let source = DomainDraw::new(cfg, replication, Domain::Source)?;
    Ok((
        target.sample(target.responses(None))?,
        source.sample(source.responses(Some(fam)))?,
    ))
}

/// `(median squared error, missing cells)` per requested estimator.
type Scores = Vec<(EstimatorId, (f64, usize))>;

/// Runs every `(family, gamma, replication)` of `cfg` for the estimators in `suite` and
/// reports the grid-median squared error against the target surface.
///
/// Bandwidths are chosen by cross-validation in each domain and, for the transfer
/// estimators, on the target residuals. A `(family, gamma, replication)` task that fails
/// is dropped from every estimator's report and counted; more than 20% failed tasks
/// fail the sweep.
pub fn run_sweep(cfg: &SimConfig, suite: &[EstimatorId]) -> Result<Vec<ErrorReport>> {
    cfg.validate()?;
    let suite: Vec<EstimatorId> = EstimatorId::ALL
        .into_iter()
        .filter(|id| suite.contains(id))
        .collect();
    if suite.is_empty() {
        return Err(Error::InvalidInput("estimator suite is empty".into()));
    }
    let grid = GridSpec::unit_square(cfg.grid_n)?;
    let spec = KernelSpec::epanechnikov();

    let targets: Vec<Result<(Arc<Sample>, Scores)>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| target_only(cfg, rep, &suite, &spec, &grid))
        .collect();

    let tasks: Vec<(usize, usize)> = (0..cfg.families.len())
        .flat_map(|f| (0..cfg.replications).map(move |r| (f, r)))
        .collect();
    let outcomes: Vec<Vec<Result<Scores>>> = tasks
        .par_iter()
        .map(|&(f, rep)| match &targets[rep] {
            Ok((target, base)) => with_transfer(
                cfg,
                cfg.families[f],
                rep,
                target,
                base,
                &suite,
                &spec,
                &grid,
            ),
            Err(e) => cfg
                .gamma_sweep
                .iter()
                .map(|_| Err(Error::Numeric(format!("target fit failed: {e}"))))
                .collect(),
        })
        .collect();

    let total = tasks.len() * cfg.gamma_sweep.len();
    let failed = outcomes.iter().flatten().filter(|o| o.is_err()).count();
    if failed * 5 > total {
        return Err(Error::SweepFailed { failed, total });
    }

    let mut reports = Vec::new();
    for (f, &kind) in cfg.families.iter().enumerate() {
        for (g, &gamma) in cfg.gamma_sweep.iter().enumerate() {
            for &id in &suite {
                let mut report = ErrorReport {
                    estimator_id: id.label().to_string(),
                    family: kind.label().to_string(),
                    gamma,
                    replications: Vec::new(),
                    n_failed: 0,
                };
                for rep in 0..cfg.replications {
                    match &outcomes[f * cfg.replications + rep][g] {
                        Ok(scores) => {
                            let (median, missing) = scores
                                .iter()
                                .find(|(e, _)| *e == id)
                                .map(|(_, s)| *s)
                                .expect("every requested estimator is scored");
                            report.replications.push((rep, median, missing));
                        }
                        Err(_) => report.n_failed += 1,
                    }
                }
                reports.push(report);
            }
        }
    }
    Ok(reports)
}

fn target_only(
    cfg: &SimConfig,
    rep: usize,
    suite: &[EstimatorId],
    spec: &KernelSpec,
    grid: &GridSpec,
) -> Result<(Arc<Sample>, Scores)> {
    let draw = DomainDraw::new(cfg, rep, Domain::Target)?;
    let target = draw.sample(draw.responses(None))?;
    let mut scores = Vec::new();
    if suite.iter().any(|id| !id.is_transfer()) {
        let cv = cv_select_shared(
            &target,
            spec,
            DEFAULT_FOLDS,
            &default_grid(&target)?,
            &[target.responses().to_vec()],
        )?;
        for &id in suite.iter().filter(|id| !id.is_transfer()) {
            let bw = match id.method() {
                Method::Nw => &cv.nw[0].best,
                Method::Ll => &cv.ll[0].best,
            };
            let surface = fit_surface(&target, spec, bw, grid, id.method())?;
            scores.push((id, grid_median_error(&surface, target_surface, grid)?));
        }
    }
    Ok((Arc::new(target), scores))
}

#[allow(clippy::too_many_arguments)]
fn with_transfer(
    cfg: &SimConfig,
    kind: BiasKind,
    rep: usize,
    target: &Sample,
    base: &Scores,
    suite: &[EstimatorId],
    spec: &KernelSpec,
    grid: &GridSpec,
) -> Vec<Result<Scores>> {
    let transfer_ids: Vec<EstimatorId> = suite
        .iter()
        .copied()
        .filter(|id| id.is_transfer())
        .collect();
    if transfer_ids.is_empty() {
        return cfg.gamma_sweep.iter().map(|_| Ok(base.clone())).collect();
    }
    let prepared = (|| -> Result<_> {
        let draw = DomainDraw::new(cfg, rep, Domain::Source)?;
        let ys = cfg
            .gamma_sweep
            .iter()
            .map(|&gamma| Ok(draw.responses(Some(&BiasFamily::new(kind, gamma)?))))
            .collect::<Result<Vec<_>>>()?;
        let design = draw.sample(ys[0].clone())?;
        let cv = cv_select_shared(&design, spec, DEFAULT_FOLDS, &default_grid(&design)?, &ys)?;
        Ok((design, ys, cv))
    })();
    let (design, ys, cv) = match prepared {
        Ok(p) => p,
        Err(e) => {
            let msg = e.to_string();
            return cfg
                .gamma_sweep
                .iter()
                .map(|_| Err(Error::Numeric(format!("source fit failed: {msg}"))))
                .collect();
        }
    };

    (0..cfg.gamma_sweep.len())
        .map(|g| {
            let source = design.with_responses(ys[g].clone())?;
            let mut scores = base.clone();
            for &id in &transfer_ids {
                let h1 = match id.method() {
                    Method::Nw => &cv.nw[g].best,
                    Method::Ll => &cv.ll[g].best,
                };
                let (fit, _) = fit_transfer_select_bias(target, &source, spec, h1, id.method())?;
                let surface = evaluate_surface(grid, |u, x| fit.predict(u, x))?;
                scores.push((id, grid_median_error(&surface, target_surface, grid)?));
            }
            scores.sort_by_key(|(id, _)| EstimatorId::ALL.iter().position(|e| e == id));
            Ok(scores)
        })
        .collect()
}
