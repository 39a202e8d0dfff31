//! Bandwidth selection by k-fold least-squares cross-validation.
//!
//! Folds are contiguous blocks of the time-ordered sample. Each held-out point is
//! predicted from the remaining folds; points whose window is empty once their fold is
//! removed are skipped and counted rather than scored.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{Method, SolverOptions};
use crate::kernels::{Bandwidth, KernelSpec};
use crate::local_design;
use crate::sample::Sample;

pub const DEFAULT_FOLDS: usize = 10;
/// Candidates per axis in [`default_grid`].
pub const GRID_POINTS_PER_AXIS: usize = 8;
pub const GRID_LOWER_FRACTION: f64 = 0.02;
pub const GRID_UPPER_FRACTION: f64 = 0.5;

/// Scores within this relative (or absolute) distance of the minimum count as ties.
const TIE_RTOL: f64 = 1e-12;
const TIE_ATOL: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldScheme {
    /// Fold `k` is the `k`-th block of consecutive observations.
    ContiguousBlocks,
    /// Fold `k` holds every observation whose index is `k` modulo the fold count.
    Interleaved,
}

impl std::str::FromStr for FoldScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contiguous" => Ok(FoldScheme::ContiguousBlocks),
            "interleaved" => Ok(FoldScheme::Interleaved),
            other => Err(Error::InvalidInput(format!(
                "unknown fold scheme '{other}'"
            ))),
        }
    }
}

impl FoldScheme {
    pub fn label(self) -> &'static str {
        match self {
            FoldScheme::ContiguousBlocks => "contiguous",
            FoldScheme::Interleaved => "interleaved",
        }
    }

    /// Whether observation `t` of `n` belongs to fold `k`.
    pub fn holds_out(self, n: usize, folds: usize, k: usize, t: usize) -> bool {
        match self {
            FoldScheme::ContiguousBlocks => fold_range(n, folds, k).contains(&t),
            FoldScheme::Interleaved => t % folds == k,
        }
    }

    pub fn members(self, n: usize, folds: usize, k: usize) -> Vec<usize> {
        match self {
            FoldScheme::ContiguousBlocks => fold_range(n, folds, k).collect(),
            FoldScheme::Interleaved => (k..n).step_by(folds).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    pub folds: usize,
    pub grid: Vec<Bandwidth>,
    pub fold_scheme: FoldScheme,
    pub method: Method,
}

impl CvPlan {
    pub fn new(folds: usize, grid: Vec<Bandwidth>, method: Method) -> Result<Self> {
        if folds < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 folds, got {folds}"
            )));
        }
        if grid.is_empty() {
            return Err(Error::InvalidInput("bandwidth grid is empty".into()));
        }
        Ok(Self {
            folds,
            grid,
            fold_scheme: FoldScheme::ContiguousBlocks,
            method,
        })
    }

    /// Ten contiguous folds over [`default_grid`] of `sample`.
    pub fn default_for(sample: &Sample, method: Method) -> Result<Self> {
        Self::new(DEFAULT_FOLDS, default_grid(sample)?, method)
    }

    pub fn with_scheme(mut self, scheme: FoldScheme) -> Self {
        self.fold_scheme = scheme;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub bandwidth: Bandwidth,
    /// Mean held-out squared error, `None` when no point could be scored.
    pub score: Option<f64>,
    pub n_scored: usize,
    pub n_skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best: Bandwidth,
    pub scores: Vec<CandidateScore>,
    /// Held-out points skipped for the selected candidate.
    pub n_skipped: usize,
}

/// Index range of fold `k` when `n` points are cut into `folds` contiguous blocks.
pub fn fold_range(n: usize, folds: usize, k: usize) -> Range<usize> {
    (k * n / folds)..((k + 1) * n / folds)
}

/// Selects the candidate with the smallest cross-validated squared error.
///
/// Ties go to the larger time bandwidth, then to the larger covariate bandwidths.
pub fn cv_select(sample: &Sample, spec: &KernelSpec, plan: &CvPlan) -> Result<CvResult> {
    cv_select_with(sample, spec, plan, SolverOptions::default())
}

pub fn cv_select_with(
    sample: &Sample,
    spec: &KernelSpec,
    plan: &CvPlan,
    options: SolverOptions,
) -> Result<CvResult> {
    check_plan(sample, plan)?;
    let y = [sample.responses()];
    let want = match plan.method {
        Method::Nw => Wanted {
            nw: true,
            ll: false,
        },
        Method::Ll => Wanted {
            nw: false,
            ll: true,
        },
    };
    let tallies = grouped_tallies(
        sample,
        spec,
        plan.fold_scheme,
        plan.folds,
        &plan.grid,
        &y,
        options,
        want,
    )?;
    let scores = plan
        .grid
        .iter()
        .zip(&tallies)
        .map(|(bw, (nw, ll))| match plan.method {
            Method::Nw => nw[0].score(bw),
            Method::Ll => ll[0].score(bw),
        })
        .collect();
    pick_best(scores)
}

fn check_plan(sample: &Sample, plan: &CvPlan) -> Result<()> {
    if plan.folds < 2 || plan.grid.is_empty() {
        return Err(Error::InvalidInput("invalid cross-validation plan".into()));
    }
    if sample.len() < plan.folds {
        return Err(Error::InvalidInput(format!(
            "sample of length {} cannot be split into {} folds",
            sample.len(),
            plan.folds
        )));
    }
    if let Some(bw) = plan.grid.iter().find(|bw| bw.dim() != sample.dim()) {
        return Err(Error::Shape(format!(
            "candidate {bw} does not match a sample with {} covariates",
            sample.dim()
        )));
    }
    Ok(())
}

fn pick_best(scores: Vec<CandidateScore>) -> Result<CvResult> {
    let best_score = scores
        .iter()
        .filter_map(|c| c.score)
        .fold(f64::INFINITY, f64::min);
    if !best_score.is_finite() {
        return Err(Error::SelectionFailure);
    }
    let cutoff = best_score + (TIE_RTOL * best_score.abs()).max(TIE_ATOL);
    let best = scores
        .iter()
        .filter(|c| c.score.is_some_and(|s| s <= cutoff))
        .max_by(|a, b| smoother_order(&a.bandwidth, &b.bandwidth))
        .expect("at least one candidate attains the minimum");
    Ok(CvResult {
        best: best.bandwidth.clone(),
        n_skipped: best.n_skipped,
        scores,
    })
}

fn smoother_order(a: &Bandwidth, b: &Bandwidth) -> std::cmp::Ordering {
    a.h_time().total_cmp(&b.h_time()).then_with(|| {
        a.h_cov()
            .iter()
            .zip(b.h_cov())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

/// Cross-validation results for several response vectors sharing one design.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedDesignCv {
    /// One result per response vector, Nadaraya–Watson.
    pub nw: Vec<CvResult>,
    /// One result per response vector, locally linear.
    pub ll: Vec<CvResult>,
}

/// Runs [`cv_select`] for both methods and every response vector in `responses`, which
/// all live on the design of `sample`.
///
/// Each window is scanned once per held-out point and candidate; the scores equal those
/// of separate [`cv_select`] calls on `sample.with_responses(..)`.
pub fn cv_select_shared(
    sample: &Sample,
    spec: &KernelSpec,
    folds: usize,
    grid: &[Bandwidth],
    responses: &[Vec<f64>],
) -> Result<SharedDesignCv> {
    let plan = CvPlan::new(folds, grid.to_vec(), Method::Ll)?;
    if let Some(r) = responses.iter().find(|r| r.len() != sample.len()) {
        return Err(Error::Shape(format!(
            "{} responses for a sample of length {}",
            r.len(),
            sample.len()
        )));
    }
    if responses.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("responses must be finite".into()));
    }
    check_plan(sample, &plan)?;
    let options = SolverOptions::default();
    let refs: Vec<&[f64]> = responses.iter().map(|r| r.as_slice()).collect();
    let k = responses.len();

    let per_candidate = grouped_tallies(
        sample,
        spec,
        FoldScheme::ContiguousBlocks,
        folds,
        grid,
        &refs,
        options,
        Wanted { nw: true, ll: true },
    )?;

    let collect = |pick: &dyn Fn(&Tallies) -> &Vec<Tally>| {
        (0..k)
            .map(|j| {
                let scores = grid
                    .iter()
                    .zip(&per_candidate)
                    .map(|(bw, tallies)| pick(tallies)[j].score(bw))
                    .collect();
                pick_best(scores)
            })
            .collect::<Result<Vec<_>>>()
    };
    Ok(SharedDesignCv {
        nw: collect(&|t| &t.0)?,
        ll: collect(&|t| &t.1)?,
    })
}

#[derive(Debug, Clone, Copy)]
struct Wanted {
    nw: bool,
    ll: bool,
}

/// `(nw, ll)` tallies of one candidate, each with one entry per response vector.
type Tallies = (Vec<Tally>, Vec<Tally>);

/// Held-out error tallies per candidate.
#[allow(clippy::too_many_arguments)]
fn grouped_tallies(
    sample: &Sample,
    spec: &KernelSpec,
    scheme: FoldScheme,
    folds: usize,
    grid: &[Bandwidth],
    refs: &[&[f64]],
    options: SolverOptions,
    want: Wanted,
) -> Result<Vec<Tallies>> {
    let k = refs.len();
    // candidates sharing a time bandwidth share one scan of each time window
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (c, bw) in grid.iter().enumerate() {
        match groups
            .iter_mut()
            .find(|g| grid[g[0]].h_time() == bw.h_time())
        {
            Some(g) => g.push(c),
            None => groups.push(vec![c]),
        }
    }
    let per_group = groups
        .par_iter()
        .map(|members| {
            let bws: Vec<&Bandwidth> = members.iter().map(|&c| &grid[c]).collect();
            let n = sample.len();
            let nf = n as f64;
            let mut nw = vec![vec![Tally::default(); k]; members.len()];
            let mut ll = vec![vec![Tally::default(); k]; members.len()];
            for f in 0..folds {
                for i in scheme.members(n, folds, f) {
                    let (u, x) = (sample.times()[i], sample.x_row(i));
                    let group_sums =
                        local_design::accumulate_raw_group(sample, spec, &bws, u, x, refs, |t| {
                            scheme.holds_out(n, folds, f, t)
                        });
                    for (m, raw) in group_sums.iter().enumerate() {
                        if want.nw {
                            if raw.n_active == 0 || raw.mass / nf < options.mass_floor {
                                nw[m].iter_mut().for_each(Tally::skip);
                            } else {
                                for (j, tally) in nw[m].iter_mut().enumerate() {
                                    let v = raw.weighted_mean(j);
                                    if !v.is_finite() {
                                        return Err(Error::Numeric(format!(
                                            "non-finite NW estimate at u = {u}"
                                        )));
                                    }
                                    tally.add(v - refs[j][i]);
                                }
                            }
                        }
                        if want.ll {
                            match raw.solve_all(nf, u, options.mass_floor, options.ridge_rel) {
                                Ok(coefs) => {
                                    for (j, (c, _)) in coefs.iter().enumerate() {
                                        ll[m][j].add(c[0] - refs[j][i]);
                                    }
                                }
                                Err(e) if e.is_empty_window() => {
                                    ll[m].iter_mut().for_each(Tally::skip)
                                }
                                Err(e) => return Err(e),
                            }
                        }
                    }
                }
            }
            Ok((nw, ll))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut per_candidate = vec![(Vec::new(), Vec::new()); grid.len()];
    for (members, (nw, ll)) in groups.iter().zip(per_group) {
        for ((&c, nw), ll) in members.iter().zip(nw).zip(ll) {
            per_candidate[c] = (nw, ll);
        }
    }
    Ok(per_candidate)
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    sse: f64,
    scored: usize,
    skipped: usize,
}

impl Tally {
    fn add(&mut self, err: f64) {
        self.sse += err.powi(2);
        self.scored += 1;
    }

    fn skip(&mut self) {
        self.skipped += 1;
    }

    fn score(&self, bw: &Bandwidth) -> CandidateScore {
        CandidateScore {
            bandwidth: bw.clone(),
            score: (self.scored > 0).then(|| self.sse / self.scored as f64),
            n_scored: self.scored,
            n_skipped: self.skipped,
        }
    }
}

/// `GRID_POINTS_PER_AXIS` log-spaced widths per axis between 2% and 50% of the axis range,
/// crossed over the time axis and every covariate axis.
pub fn default_grid(sample: &Sample) -> Result<Vec<Bandwidth>> {
    if sample.is_empty() {
        return Err(Error::EmptyInput("sample"));
    }
    let times = sample.times();
    let mut ranges = vec![times[times.len() - 1] - times[0]];
    ranges.extend((0..sample.dim()).map(|j| {
        let (lo, hi) = sample.covariate_range(j);
        hi - lo
    }));
    if let Some(axis) = ranges.iter().position(|r| !(*r > 0.0)) {
        return Err(Error::Degenerate(format!(
            "axis {axis} has zero spread; cannot build a bandwidth grid"
        )));
    }

    let ratio = GRID_UPPER_FRACTION / GRID_LOWER_FRACTION;
    let last = (GRID_POINTS_PER_AXIS - 1) as f64;
    let fractions: Vec<f64> = (0..GRID_POINTS_PER_AXIS)
        .map(|k| {
            if k + 1 == GRID_POINTS_PER_AXIS {
                GRID_UPPER_FRACTION
            } else {
                GRID_LOWER_FRACTION * ratio.powf(k as f64 / last)
            }
        })
        .collect();

    let axes = ranges.len();
    let total = GRID_POINTS_PER_AXIS.pow(axes as u32);
    (0..total)
        .map(|mut idx| {
            let mut widths = vec![0.0; axes];
            for a in (0..axes).rev() {
                widths[a] = fractions[idx % GRID_POINTS_PER_AXIS] * ranges[a];
                idx /= GRID_POINTS_PER_AXIS;
            }
            let h_time = widths.remove(0);
            Bandwidth::new(h_time, widths)
        })
        .collect()
}
