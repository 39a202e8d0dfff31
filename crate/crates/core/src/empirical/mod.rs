//! Empirical pipeline: dated CSV series in, held-out losses of the baseline, transfer and
//! pooled estimators out.

pub mod clean;
pub mod covariates;
pub mod fixture;
pub mod harmonize;
pub mod io;
pub mod pipeline;
pub mod split;

pub use clean::{clean_series, CleanOptions};
pub use covariates::{build_covariate, CovariateColumn, CovariateMode};
pub use harmonize::{harmonize, Harmonized, TimeMap};
pub use io::{read_series, read_series_from, write_series, RawSeries};
pub use pipeline::{
    evaluate, prepare, run_pipeline, write_predictions, write_results, write_triples, Competitor,
    DomainInputs, DomainTriples, DropCounts, EmpiricalReport, MethodPredictions, PipelineOptions,
    PreparedData,
};
pub use split::{rescale_covariates, split_every_fourth, split_indices, MinMax};
