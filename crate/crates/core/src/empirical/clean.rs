//! Gap filling for dated series.

use super::io::RawSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanOptions {
    /// Longest run of missing rows that is filled.
    pub max_gap: usize,
    /// Fewer valid rows than this after cleaning is an error.
    pub min_valid: usize,
}

impl Default for CleanOptions {
    fn default() -> Self {
        Self {
            max_gap: 3,
            min_valid: 10,
        }
    }
}

/// Fills every run of at most `max_gap` missing rows that has a valid neighbour on both
/// sides with the mean of those two neighbours. Longer runs, and runs at either end of
/// the series, stay missing. Valid values are never changed.
pub fn clean_series(raw: &RawSeries, opts: CleanOptions) -> Result<RawSeries> {
    let mut rows = raw.rows.clone();
    let n = rows.len();
    let mut t = 0;
    while t < n {
        if rows[t].1.is_some() {
            t += 1;
            continue;
        }
        let start = t;
        while t < n && rows[t].1.is_none() {
            t += 1;
        }
        let len = t - start;
        if start > 0 && t < n && len <= opts.max_gap {
            let (left, right) = (rows[start - 1].1.unwrap(), rows[t].1.unwrap());
            for row in &mut rows[start..t] {
                row.1 = Some((left + right) / 2.0);
            }
        }
    }
    let cleaned = RawSeries {
        source_id: raw.source_id.clone(),
        rows,
    };
    let valid = cleaned.n_valid();
    if valid < opts.min_valid {
        return Err(Error::InsufficientData {
            source_id: raw.source_id.clone(),
            valid,
            required: opts.min_valid,
        });
    }
    Ok(cleaned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn series(values: &[Option<f64>]) -> RawSeries {
        let d0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        RawSeries::new(
            "s",
            values
                .iter()
                .enumerate()
                .map(|(k, v)| (d0 + chrono::Days::new(k as u64), *v))
                .collect(),
        )
        .unwrap()
    }

    fn values(s: &RawSeries) -> Vec<Option<f64>> {
        s.rows.iter().map(|r| r.1).collect()
    }

    const LOOSE: CleanOptions = CleanOptions {
        max_gap: 3,
        min_valid: 1,
    };

    #[test]
    fn fills_short_gap_with_neighbour_mean() {
        let s = clean_series(&series(&[Some(1.0), None, Some(3.0)]), LOOSE).unwrap();
        assert_eq!(values(&s), vec![Some(1.0), Some(2.0), Some(3.0)]);
    }

    #[test]
    fn nonnumeric_entries_become_missing_then_filled() {
        let text = "date,value\n2020-01-01,1\n2020-01-02,n/a\n2020-01-03,3\n";
        let raw = super::super::io::read_series_from(text.as_bytes(), None, "s").unwrap();
        let s = clean_series(&raw, LOOSE).unwrap();
        assert_eq!(values(&s), vec![Some(1.0), Some(2.0), Some(3.0)]);
    }

    #[test]
    fn long_and_edge_gaps_stay_missing() {
        let mut v = vec![Some(1.0)];
        v.extend([None; 5]);
        v.push(Some(2.0));
        let s = clean_series(&series(&v), LOOSE).unwrap();
        assert_eq!(values(&s), v);

        let v = vec![None, Some(1.0), Some(2.0), None];
        assert_eq!(values(&clean_series(&series(&v), LOOSE).unwrap()), v);

        let mut v = vec![Some(0.0)];
        v.extend([None; 3]);
        v.push(Some(6.0));
        let filled = values(&clean_series(&series(&v), LOOSE).unwrap());
        assert_eq!(
            filled,
            vec![Some(0.0), Some(3.0), Some(3.0), Some(3.0), Some(6.0)]
        );
    }

    #[test]
    fn too_few_valid_rows() {
        let e = clean_series(
            &series(&[Some(1.0), None, Some(2.0)]),
            CleanOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(
            e,
            Error::InsufficientData {
                valid: 3,
                required: 10,
                ..
            }
        ));
    }

    proptest! {
        #[test]
        fn never_changes_valid_values(v in prop::collection::vec(prop::option::weighted(0.7, -1e3f64..1e3), 1..60)) {
            let s = clean_series(&series(&v), CleanOptions { max_gap: 3, min_valid: 0 }).unwrap();
            for (before, after) in v.iter().zip(values(&s)) {
                if before.is_some() {
                    prop_assert_eq!(*before, after);
                }
            }
        }
    }
}
