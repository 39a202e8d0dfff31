//! Ingest, harmonize, build covariates, split, fit the three estimators and score them.

use std::io::Write;
use std::sync::Arc;

use chrono::NaiveDate;

use super::clean::{clean_series, CleanOptions};
use super::covariates::{build_covariate, CovariateMode};
use super::harmonize::{harmonize, TimeMap};
use super::io::{csv_writer_error, RawSeries};
use super::split::{rescale_covariates, split_indices, MinMax};
use crate::bandwidth::{cv_select, CvPlan, FoldScheme};
use crate::error::{Error, Result};
use crate::estimators::{Estimator, Method};
use crate::kernels::KernelSpec;
use crate::metrics::test_losses;
use crate::sample::{Domain, Sample};
use crate::transfer::{fit_transfer_cv_with, pooled_sample, TransferFit};

/// Response series, covariate input series and the covariate construction of one domain.
#[derive(Debug, Clone)]
pub struct DomainInputs {
    pub response: RawSeries,
    pub covariate: RawSeries,
    pub mode: CovariateMode,
}

/// Triples of one domain, in date order, with the covariate already on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainTriples {
    pub dates: Vec<NaiveDate>,
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Newest input date that entered each covariate value.
    pub covariate_dates: Vec<NaiveDate>,
    pub x_scale: MinMax,
}

impl DomainTriples {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn sample(&self, domain: Domain) -> Result<Sample> {
        Sample::from_flat(self.u.clone(), self.x.clone(), 1, self.y.clone(), domain)
    }

    fn subset(&self, idx: &[usize]) -> Result<Sample> {
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Sample::from_flat(
            pick(&self.u),
            pick(&self.x),
            1,
            pick(&self.y),
            Domain::Target,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub clean: CleanOptions,
    /// Interleaved by default: with contiguous blocks a held-out block of rescaled time
    /// has no training data nearby, so small time bandwidths cannot be scored there.
    pub fold_scheme: FoldScheme,
    pub spec: KernelSpec,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            clean: CleanOptions::default(),
            fold_scheme: FoldScheme::Interleaved,
            spec: KernelSpec::epanechnikov(),
        }
    }
}

/// [`prepare`] followed by [`evaluate`].
pub fn run_pipeline(
    source: &DomainInputs,
    target: &DomainInputs,
    opts: &PipelineOptions,
) -> Result<(PreparedData, EmpiricalReport)> {
    let data = prepare(source, target, opts.clean)?;
    let report = evaluate(&data, &opts.spec, opts.fold_scheme)?;
    Ok((data, report))
}

/// Rows lost on the way from raw series to triples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropCounts {
    pub source_missing_response: usize,
    pub source_missing_covariate: usize,
    pub target_outside_source_range: usize,
    pub target_missing_response: usize,
    pub target_missing_covariate: usize,
}

/// Harmonized, rescaled and split data of both domains.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub time_map: TimeMap,
    pub source: DomainTriples,
    pub target: DomainTriples,
    /// Indices into `target` of the training and test rows.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub dropped: DropCounts,
}

impl PreparedData {
    pub fn source_sample(&self) -> Result<Sample> {
        self.source.sample(Domain::Source)
    }

    pub fn target_train(&self) -> Result<Sample> {
        self.target.subset(&self.train)
    }

    pub fn target_test(&self) -> Result<Sample> {
        self.target.subset(&self.test)
    }
}

struct Rows {
    dates: Vec<NaiveDate>,
    u: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    covariate_dates: Vec<NaiveDate>,
    missing_response: usize,
    missing_covariate: usize,
}

fn assemble(
    response: &RawSeries,
    rows: &[(usize, f64)],
    inputs: &DomainInputs,
    clean: CleanOptions,
) -> Result<Rows> {
    let covariate = clean_series(&inputs.covariate, clean)?;
    let dates: Vec<NaiveDate> = response.dates().collect();
    let col = build_covariate(inputs.mode, &covariate, &dates);
    let mut out = Rows {
        dates: Vec::new(),
        u: Vec::new(),
        x: Vec::new(),
        y: Vec::new(),
        covariate_dates: Vec::new(),
        missing_response: 0,
        missing_covariate: 0,
    };
    for &(k, u) in rows {
        let Some(y) = response.rows[k].1 else {
            out.missing_response += 1;
            continue;
        };
        let (Some(x), Some(latest)) = (col.values[k], col.latest_input[k]) else {
            out.missing_covariate += 1;
            continue;
        };
        out.dates.push(dates[k]);
        out.u.push(u);
        out.x.push(x);
        out.y.push(y);
        out.covariate_dates.push(latest);
    }
    Ok(out)
}

/// Runs every step up to and including the train/test split.
///
/// The source time map is built from all cleaned source response dates; rows whose
/// response or covariate is still missing afterwards are excluded from the triples.
pub fn prepare(
    source: &DomainInputs,
    target: &DomainInputs,
    clean: CleanOptions,
) -> Result<PreparedData> {
    let source_y = clean_series(&source.response, clean)?;
    let target_y = clean_series(&target.response, clean)?;
    let h = harmonize(&source_y, &target_y)?;

    let source_rows: Vec<(usize, f64)> = h.source_u.iter().copied().enumerate().collect();
    let s = assemble(&source_y, &source_rows, source, clean)?;
    let t = assemble(&target_y, &h.target_u, target, clean)?;
    if s.u.is_empty() || t.u.len() < 4 {
        return Err(Error::InsufficientData {
            source_id: target.response.source_id.clone(),
            valid: s.u.len().min(t.u.len()),
            required: 4,
        });
    }
    let (sx, tx, s_scale, t_scale) = rescale_covariates(&s.x, &t.x)?;
    let (train, test) = split_indices(t.u.len());

    Ok(PreparedData {
        time_map: h.time_map,
        dropped: DropCounts {
            source_missing_response: s.missing_response,
            source_missing_covariate: s.missing_covariate,
            target_outside_source_range: h.n_dropped,
            target_missing_response: t.missing_response,
            target_missing_covariate: t.missing_covariate,
        },
        source: DomainTriples {
            dates: s.dates,
            u: s.u,
            x: sx,
            y: s.y,
            covariate_dates: s.covariate_dates,
            x_scale: s_scale,
        },
        target: DomainTriples {
            dates: t.dates,
            u: t.u,
            x: tx,
            y: t.y,
            covariate_dates: t.covariate_dates,
            x_scale: t_scale,
        },
        train,
        test,
    })
}

/// The three competing estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Competitor {
    Baseline,
    Transfer,
    Pooled,
}

impl Competitor {
    pub const ALL: [Competitor; 3] = [
        Competitor::Baseline,
        Competitor::Transfer,
        Competitor::Pooled,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Competitor::Baseline => "Baseline",
            Competitor::Transfer => "Transfer",
            Competitor::Pooled => "Pooled",
        }
    }
}

/// Held-out predictions of one smoothing method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodPredictions {
    pub method: Method,
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    pub y_true: Vec<f64>,
    /// Indexed like [`Competitor::ALL`].
    pub predicted: [Vec<f64>; 3],
    /// Test points where at least one competitor had an empty window.
    pub n_skipped: usize,
}

impl MethodPredictions {
    /// `(L2, L∞)` of one competitor.
    pub fn losses(&self, who: Competitor) -> Result<(f64, f64)> {
        test_losses(&self.predicted[who as usize], &self.y_true)
    }
}

/// Results of the full pipeline: NW first, then LL.
#[derive(Debug, Clone)]
pub struct EmpiricalReport {
    pub predictions: Vec<MethodPredictions>,
}

impl EmpiricalReport {
    /// Rows Baseline/Transfer/Pooled; columns NW L2, NW L∞, LL L2, LL L∞.
    pub fn table(&self) -> Result<[[f64; 4]; 3]> {
        let mut table = [[f64::NAN; 4]; 3];
        for (m, preds) in self.predictions.iter().enumerate() {
            for who in Competitor::ALL {
                let (l2, linf) = preds.losses(who)?;
                table[who as usize][2 * m] = l2;
                table[who as usize][2 * m + 1] = linf;
            }
        }
        Ok(table)
    }
}

fn cv_estimator(
    sample: Sample,
    spec: &KernelSpec,
    method: Method,
    scheme: FoldScheme,
) -> Result<Estimator> {
    let cv = cv_select(
        &sample,
        spec,
        &CvPlan::default_for(&sample, method)?.with_scheme(scheme),
    )?;
    Estimator::new(Arc::new(sample), *spec, cv.best, method)
}

fn predict_all(
    models: &(Estimator, TransferFit, Estimator),
    u: f64,
    x: &[f64],
) -> Result<[f64; 3]> {
    Ok([
        models.0.predict(u, x)?,
        models.1.predict(u, x)?,
        models.2.predict(u, x)?,
    ])
}

/// Fits baseline, transfer and pooled estimators with cross-validated bandwidths and
/// predicts every test point.
pub fn evaluate(
    data: &PreparedData,
    spec: &KernelSpec,
    scheme: FoldScheme,
) -> Result<EmpiricalReport> {
    let source = data.source_sample()?;
    let train = data.target_train()?;
    let test = data.target_test()?;
    let pooled = pooled_sample(&train, &source)?;

    let mut predictions = Vec::new();
    for method in [Method::Nw, Method::Ll] {
        let models = (
            cv_estimator(train.clone(), spec, method, scheme)?,
            fit_transfer_cv_with(&train, &source, spec, method, scheme)?.0,
            cv_estimator(pooled.clone(), spec, method, scheme)?,
        );
        let mut p = MethodPredictions {
            method,
            u: Vec::new(),
            x: Vec::new(),
            y_true: Vec::new(),
            predicted: [Vec::new(), Vec::new(), Vec::new()],
            n_skipped: 0,
        };
        for t in 0..test.len() {
            let (u, x) = (test.times()[t], test.x_row(t));
            match predict_all(&models, u, x) {
                Ok(values) => {
                    p.u.push(u);
                    p.x.push(x[0]);
                    p.y_true.push(test.responses()[t]);
                    for (k, v) in values.into_iter().enumerate() {
                        p.predicted[k].push(v);
                    }
                }
                Err(e) if e.is_empty_window() => p.n_skipped += 1,
                Err(e) => return Err(e),
            }
        }
        if p.u.is_empty() {
            return Err(Error::NoData);
        }
        predictions.push(p);
    }
    Ok(EmpiricalReport { predictions })
}

/// Writes `u,x,y,split` for every triple; `split` is `source`, `train` or `test`.
pub fn write_triples<W: Write>(out: W, data: &PreparedData) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = csv_writer_error("triples");
    w.write_record(["u", "x", "y", "split"]).map_err(&err)?;
    let mut labels = vec!["train"; data.target.len()];
    for &i in &data.test {
        labels[i] = "test";
    }
    let rows = (0..data.source.len())
        .map(|i| (&data.source, i, "source"))
        .chain((0..data.target.len()).map(|i| (&data.target, i, labels[i])));
    for (d, i, label) in rows {
        w.write_record([
            d.u[i].to_string(),
            d.x[i].to_string(),
            d.y[i].to_string(),
            label.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `u,x,y_true,y_baseline,y_transfer,y_pooled` for one method.
pub fn write_predictions<W: Write>(out: W, preds: &MethodPredictions) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = csv_writer_error("predictions");
    w.write_record(["u", "x", "y_true", "y_baseline", "y_transfer", "y_pooled"])
        .map_err(&err)?;
    for i in 0..preds.u.len() {
        let mut rec = vec![
            preds.u[i].to_string(),
            preds.x[i].to_string(),
            preds.y_true[i].to_string(),
        ];
        rec.extend(preds.predicted.iter().map(|p| p[i].to_string()));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the loss table `estimator,nw_l2,nw_linf,ll_l2,ll_linf`.
pub fn write_results<W: Write>(out: W, report: &EmpiricalReport) -> Result<()> {
    let table = report.table()?;
    let mut w = csv::Writer::from_writer(out);
    let err = csv_writer_error("results");
    w.write_record(["estimator", "nw_l2", "nw_linf", "ll_l2", "ll_linf"])
        .map_err(&err)?;
    for who in Competitor::ALL {
        let mut rec = vec![who.label().to_string()];
        rec.extend(table[who as usize].iter().map(f64::to_string));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush()?;
    Ok(())
}
