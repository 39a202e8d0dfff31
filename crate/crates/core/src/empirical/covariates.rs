//! Covariates that only use information from before the response date.

use std::str::FromStr;

use chrono::NaiveDate;

use super::io::RawSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariateMode {
    /// Last daily observation strictly before the response date.
    LaggedDaily,
    /// Mean of the daily observations in `[previous response date, response date)`.
    WeeklyAverage,
    /// Last observation of a related series of the same domain before the response date.
    RelatedFuelLag,
}

impl FromStr for CovariateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lagged_daily" => Ok(Self::LaggedDaily),
            "weekly_average" => Ok(Self::WeeklyAverage),
            "related_fuel_lag" => Ok(Self::RelatedFuelLag),
            other => Err(Error::InvalidInput(format!(
                "unknown covariate mode '{other}'"
            ))),
        }
    }
}

/// Covariate values aligned with the response rows. `latest_input` is the newest date
/// that entered each value; rows without a value were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateColumn {
    pub values: Vec<Option<f64>>,
    pub latest_input: Vec<Option<NaiveDate>>,
    pub n_dropped: usize,
}

impl CovariateColumn {
    fn from_pairs(pairs: Vec<Option<(f64, NaiveDate)>>) -> Self {
        Self {
            n_dropped: pairs.iter().filter(|p| p.is_none()).count(),
            values: pairs.iter().map(|p| p.map(|x| x.0)).collect(),
            latest_input: pairs.iter().map(|p| p.map(|x| x.1)).collect(),
        }
    }
}

pub fn build_covariate(
    mode: CovariateMode,
    input: &RawSeries,
    response_dates: &[NaiveDate],
) -> CovariateColumn {
    match mode {
        CovariateMode::LaggedDaily | CovariateMode::RelatedFuelLag => lagged(input, response_dates),
        CovariateMode::WeeklyAverage => weekly_average(input, response_dates),
    }
}

/// The input row immediately preceding each response date; missing if that row is missing.
pub fn lagged(input: &RawSeries, response_dates: &[NaiveDate]) -> CovariateColumn {
    CovariateColumn::from_pairs(
        response_dates
            .iter()
            .map(|&d| {
                let k = input.rows.partition_point(|r| r.0 < d);
                let (date, value) = *input.rows.get(k.checked_sub(1)?)?;
                value.map(|v| (v, date))
            })
            .collect(),
    )
}

/// The first response row has no previous date and is dropped, as is every row whose
/// window holds no valid input.
pub fn weekly_average(daily: &RawSeries, response_dates: &[NaiveDate]) -> CovariateColumn {
    CovariateColumn::from_pairs(
        response_dates
            .iter()
            .enumerate()
            .map(|(k, &end)| {
                let start = *response_dates.get(k.checked_sub(1)?)?;
                let lo = daily.rows.partition_point(|r| r.0 < start);
                let hi = daily.rows.partition_point(|r| r.0 < end);
                let window: Vec<(NaiveDate, f64)> = daily.rows[lo..hi]
                    .iter()
                    .filter_map(|&(d, v)| v.map(|v| (d, v)))
                    .collect();
                let (latest, _) = *window.last()?;
                let mean = window.iter().map(|w| w.1).sum::<f64>() / window.len() as f64;
                Some((mean, latest))
            })
            .collect(),
    )
}
