//! Deterministic train/test split and per-domain covariate rescaling.

use crate::error::{Error, Result};
use crate::sample::Sample;

/// 0-based indices of the training and test rows: the 1-based positions divisible by 4
/// are test rows.
pub fn split_indices(n: usize) -> (Vec<usize>, Vec<usize>) {
    (0..n).partition(|i| (i + 1) % 4 != 0)
}

pub fn split_every_fourth(sample: &Sample) -> Result<(Sample, Sample)> {
    if sample.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 observations to split, got {}",
            sample.len()
        )));
    }
    let (train, test) = split_indices(sample.len());
    Ok((sample.subset(&train)?, sample.subset(&test)?))
}

/// Min-max transform onto `[0, 1]`, kept so values can be mapped back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMax {
    pub lo: f64,
    pub hi: f64,
}

impl MinMax {
    pub fn fit(values: &[f64]) -> Result<Self> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() {
            return Err(Error::EmptyInput("covariate column"));
        }
        if !(hi > lo) {
            return Err(Error::Degenerate("covariate has zero spread".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }

    pub fn invert(&self, v: f64) -> f64 {
        self.lo + v * (self.hi - self.lo)
    }
}

/// Rescales each domain's covariate column onto `[0, 1]` separately.
pub fn rescale_covariates(
    source_x: &[f64],
    target_x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, MinMax, MinMax)> {
    let (s, t) = (MinMax::fit(source_x)?, MinMax::fit(target_x)?);
    Ok((
        source_x.iter().map(|&v| s.apply(v)).collect(),
        target_x.iter().map(|&v| t.apply(v)).collect(),
        s,
        t,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Domain;
    use proptest::prelude::*;

    #[test]
    fn every_fourth_one_based() {
        assert_eq!(split_indices(8), (vec![0, 1, 2, 4, 5, 6], vec![3, 7]));
        assert_eq!(split_indices(4), (vec![0, 1, 2], vec![3]));
        let (train, test) = split_indices(5);
        assert_eq!((train.len(), test), (4, vec![3]));
    }

    #[test]
    fn split_samples_keep_order() {
        let s = Sample::from_series(
            (0..9).map(|k| vec![k as f64]).collect(),
            (0..9).map(f64::from).collect(),
            Domain::Target,
        )
        .unwrap();
        let (train, test) = split_every_fourth(&s).unwrap();
        assert_eq!(test.responses(), &[3.0, 7.0]);
        assert_eq!(train.responses(), &[0.0, 1.0, 2.0, 4.0, 5.0, 6.0, 8.0]);
        let short = s.subset(&[0, 1, 2]).unwrap();
        assert!(split_every_fourth(&short).is_err());
    }

    #[test]
    fn min_max_examples() {
        let m = MinMax::fit(&[2.0, 4.0, 6.0]).unwrap();
        assert_eq!([2.0, 4.0, 6.0].map(|v| m.apply(v)), [0.0, 0.5, 1.0]);
        assert_eq!(m.invert(0.5), 4.0);
        let id = MinMax::fit(&[0.0, 0.25, 1.0]).unwrap();
        assert_eq!(id.apply(0.25), 0.25);
        assert!(matches!(
            MinMax::fit(&[3.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
    }

    proptest! {
        #[test]
        fn split_partitions(n in 0usize..500) {
            let (train, test) = split_indices(n);
            prop_assert_eq!(test.len(), n / 4);
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
}
