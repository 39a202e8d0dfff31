//! Seeded synthetic fuel-price data in the input CSV schema, with a smooth planted bias
//! between the two domains.
//!
//! * `crude.csv`: weekday-only crude price with `n/a` entries, short gaps and one long gap.
//! * `source_diesel.csv`: daily source-domain retail price.
//! * `target_diesel.csv`: weekly (Monday) target-domain retail price.
//!
//! Both retail prices follow the same surface in calendar time and lagged crude; the
//! target adds a bias that is smooth in both arguments and not affine in the response.

use std::f64::consts::PI;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};

use super::covariates::CovariateMode;
use super::io::{read_series_from, DATE_FORMAT};
use super::pipeline::DomainInputs;
use crate::datagen::Rng;
use crate::error::Result;

pub const FIXTURE_SEED: u64 = 20_240_101;
pub const CRUDE_FILE: &str = "crude.csv";
pub const SOURCE_FILE: &str = "source_diesel.csv";
pub const TARGET_FILE: &str = "target_diesel.csv";

const N_DAYS: u64 = 4 * 365 + 1;
const SOURCE_NOISE_SD: f64 = 0.03;
const TARGET_NOISE_SD: f64 = 0.03;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date")
}

/// Common regression surface in calendar fraction `s` and crude price `c`.
fn shared_surface(s: f64, c: f64) -> f64 {
    2.0 + 0.5 * s + 0.025 * (c - 70.0) + 0.15 * (2.0 * PI * s).sin() + 0.1 * (16.0 * PI * s).sin()
}

fn planted_bias(s: f64, c: f64) -> f64 {
    let z = (c - 70.0) / 15.0;
    0.3 * (1.5 * PI * s).cos() + 0.1 * z * z
}

fn csv_text(rows: impl Iterator<Item = (NaiveDate, String)>) -> String {
    let mut text = String::from("date,value\n");
    for (d, v) in rows {
        text.push_str(&format!("{},{v}\n", d.format(DATE_FORMAT)));
    }
    text
}

fn round4(v: f64) -> String {
    format!("{:.4}", v)
}

/// The three fixture files as `(file name, CSV text)`.
pub fn fixture_files(seed: u64) -> Vec<(&'static str, String)> {
    let root = Rng::new(seed);
    let mut crude_rng = root.stream(&[0]);
    let mut source_rng = root.stream(&[1]);
    let mut target_rng = root.stream(&[2]);
    let mut gap_rng = root.stream(&[3]);

    // latent daily crude: mean-reverting walk around a slow cycle
    let mut crude = Vec::with_capacity(N_DAYS as usize);
    let mut dev = 0.0;
    for k in 0..N_DAYS {
        let s = k as f64 / N_DAYS as f64;
        dev = 0.97 * dev + 1.2 * crude_rng.standard_normal();
        crude.push(70.0 + 15.0 * (2.0 * PI * (1.3 * s + 0.1)).sin() + dev);
    }
    let day = |k: u64| start() + Days::new(k);
    let frac = |k: u64| (k + 1) as f64 / N_DAYS as f64;

    let long_gap = 600..605;
    let crude_rows = (0..N_DAYS)
        .filter(|&k| !matches!(day(k).weekday(), Weekday::Sat | Weekday::Sun))
        .map(|k| {
            let r = gap_rng.uniform();
            let v = if long_gap.contains(&k) || r < 0.01 {
                "n/a".to_string()
            } else if r < 0.02 {
                String::new()
            } else {
                round4(crude[k as usize])
            };
            (day(k), v)
        });

    let source_rows = (1..N_DAYS).map(|k| {
        let s = frac(k);
        let y = shared_surface(s, crude[k as usize - 1])
            + SOURCE_NOISE_SD * source_rng.standard_normal();
        (
            day(k),
            if k % 97 == 0 {
                String::new()
            } else {
                round4(y)
            },
        )
    });

    // weekly on Mondays; the covariate is the previous week's average crude price
    let target_rows = (7..N_DAYS)
        .filter(|&k| day(k).weekday() == Weekday::Mon)
        .map(|k| {
            let s = frac(k);
            let c = crude[(k - 7) as usize..k as usize].iter().sum::<f64>() / 7.0;
            let y = shared_surface(s, c)
                + planted_bias(s, c)
                + TARGET_NOISE_SD * target_rng.standard_normal();
            (day(k), round4(y))
        });

    vec![
        (CRUDE_FILE, csv_text(crude_rows)),
        (SOURCE_FILE, csv_text(source_rows)),
        (TARGET_FILE, csv_text(target_rows)),
    ]
}

pub fn write_fixture(dir: &Path, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, text) in fixture_files(seed) {
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}

/// Source uses the lagged daily crude price, target the average over the previous week.
pub fn fixture_inputs(seed: u64) -> Result<(DomainInputs, DomainInputs)> {
    let files = fixture_files(seed);
    let read = |k: usize| read_series_from(files[k].1.as_bytes(), None, files[k].0);
    let crude = read(0)?;
    Ok((
        DomainInputs {
            response: read(1)?,
            covariate: crude.clone(),
            mode: CovariateMode::LaggedDaily,
        },
        DomainInputs {
            response: read(2)?,
            covariate: crude,
            mode: CovariateMode::WeeklyAverage,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_files_match_generator() {
        let shipped = [
            include_str!("../../../../data/fixture/crude.csv"),
            include_str!("../../../../data/fixture/source_diesel.csv"),
            include_str!("../../../../data/fixture/target_diesel.csv"),
        ];
        for ((name, text), disk) in fixture_files(FIXTURE_SEED).iter().zip(shipped) {
            assert_eq!(text, disk, "{name} is stale");
        }
    }

    #[test]
    fn fixture_has_gaps_to_clean() {
        let (source, target) = fixture_inputs(FIXTURE_SEED).unwrap();
        let crude = &source.covariate;
        assert!(crude.n_valid() < crude.len());
        assert!(crude
            .dates()
            .all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
        assert!(target.response.dates().all(|d| d.weekday() == Weekday::Mon));
        assert!(source.response.len() > 5 * target.response.len());
    }
}
