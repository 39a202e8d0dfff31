//! Common rescaled-time axis for a daily source and a weekly target.

use chrono::NaiveDate;

use super::io::RawSeries;
use crate::error::{Error, Result};

/// Piecewise-linear map from calendar date to rescaled time, with knots at the source
/// dates: the `k`-th source date (1-based) maps to `k / T1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMap {
    days: Vec<i32>,
    u: Vec<f64>,
}

fn day_number(d: NaiveDate) -> i32 {
    d.num_days_from_ce()
}

use chrono::Datelike;

impl TimeMap {
    pub fn from_dates(dates: &[NaiveDate]) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::EmptyInput("source dates"));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "source dates must be strictly increasing".into(),
            ));
        }
        let n = dates.len() as f64;
        Ok(Self {
            days: dates.iter().map(|&d| day_number(d)).collect(),
            u: (1..=dates.len()).map(|k| k as f64 / n).collect(),
        })
    }

    /// Knot values `k / T1`.
    pub fn knots(&self) -> &[f64] {
        &self.u
    }

    /// `None` outside the source date range.
    pub fn u_at(&self, date: NaiveDate) -> Option<f64> {
        let day = day_number(date);
        let k = self.days.partition_point(|&d| d < day);
        if k == self.days.len() {
            return None;
        }
        if self.days[k] == day {
            return Some(self.u[k]);
        }
        if k == 0 {
            return None;
        }
        let frac = f64::from(day - self.days[k - 1]) / f64::from(self.days[k] - self.days[k - 1]);
        Some(self.u[k - 1] + (self.u[k] - self.u[k - 1]) * frac)
    }
}

/// Rescaled times of both domains.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonized {
    pub time_map: TimeMap,
    /// One entry per source row.
    pub source_u: Vec<f64>,
    /// `(target row index, u)` for every target row inside the source date range.
    pub target_u: Vec<(usize, f64)>,
    /// Target rows outside the source date range.
    pub n_dropped: usize,
}

/// Source rows get `t1 / T1` in date order; target dates are interpolated on that map.
pub fn harmonize(source: &RawSeries, target: &RawSeries) -> Result<Harmonized> {
    let dates: Vec<NaiveDate> = source.dates().collect();
    let time_map = TimeMap::from_dates(&dates)?;
    let target_u: Vec<(usize, f64)> = target
        .dates()
        .enumerate()
        .filter_map(|(k, d)| time_map.u_at(d).map(|u| (k, u)))
        .collect();
    if target_u.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(Harmonized {
        source_u: time_map.knots().to_vec(),
        n_dropped: target.len() - target_u.len(),
        target_u,
        time_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, m, day).unwrap()
    }

    fn series(dates: &[NaiveDate]) -> RawSeries {
        RawSeries::new("s", dates.iter().map(|&x| (x, Some(1.0))).collect()).unwrap()
    }

    #[test]
    fn knots_and_midpoints() {
        let map = TimeMap::from_dates(&[d(1, 1), d(1, 3), d(1, 5), d(1, 7), d(1, 9)]).unwrap();
        assert_eq!(map.u_at(d(1, 3)), Some(0.4));
        assert!((map.u_at(d(1, 4)).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(map.u_at(d(1, 9)), Some(1.0));
        assert_eq!(map.u_at(d(1, 10)), None);

        let knots: Vec<NaiveDate> = (1..=50)
            .map(|k| d(1, 1) + chrono::Days::new(2 * k))
            .collect();
        let map = TimeMap::from_dates(&knots).unwrap();
        // knots 20 and 21 have u 0.40 and 0.42
        let mid = knots[19] + chrono::Days::new(1);
        assert!((map.u_at(mid).unwrap() - 0.41).abs() < 1e-15);
    }

    #[test]
    fn drops_targets_outside_source_range() {
        let src = series(&[d(2, 1), d(2, 2), d(2, 3), d(2, 4)]);
        let tgt = series(&[d(1, 25), d(2, 2), d(2, 4), d(2, 8)]);
        let h = harmonize(&src, &tgt).unwrap();
        assert_eq!(h.source_u, vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(h.target_u, vec![(1, 0.5), (2, 1.0)]);
        assert_eq!(h.n_dropped, 2);

        let late = series(&[d(3, 1)]);
        assert!(matches!(harmonize(&src, &late), Err(Error::NoOverlap)));
    }

    #[test]
    fn target_u_is_monotone() {
        let src: Vec<NaiveDate> = (0..300)
            .map(|k| d(1, 1) + chrono::Days::new(k + k / 5))
            .collect();
        let tgt: Vec<NaiveDate> = (0..60)
            .map(|k| d(1, 4) + chrono::Days::new(7 * k))
            .collect();
        let h = harmonize(&series(&src), &series(&tgt)).unwrap();
        assert!(h.target_u.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!(h.target_u.iter().all(|&(_, u)| (0.0..=1.0).contains(&u)));
    }
}
