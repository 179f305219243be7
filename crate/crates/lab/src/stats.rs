//! Cross-seed aggregation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::train::{stream_rng, RunRecord};

/// Two-sided 90% standard-normal quantile.
pub const Z90: f64 = 1.644_853_626_951_472_2;
pub const BOOTSTRAP_RESAMPLES: usize = 10_000;
/// Seed of the bootstrap resampler, fixed so summaries are reproducible.
const BOOTSTRAP_SEED: u64 = 0x5eed;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// `mean ± z₀.₉₅ · sd / √n`.
pub fn normal_ci90(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let half = Z90 * std_dev(xs) / (xs.len() as f64).sqrt();
    (m - half, m + half)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval for the sample standard deviation.
pub fn bootstrap_std_interval<R: Rng + ?Sized>(xs: &[f64], resamples: usize, level: f64, rng: &mut R) -> (f64, f64) {
    let n = xs.len();
    let mut stds: Vec<f64> = (0..resamples)
        .map(|_| {
            let sample: Vec<f64> = (0..n).map(|_| xs[rng.random_range(0..n)]).collect();
            std_dev(&sample)
        })
        .collect();
    stds.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    (quantile(&stds, tail), quantile(&stds, 1.0 - tail))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub step: usize,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdSummary {
    pub n_runs: usize,
    pub final_returns: Vec<f64>,
    pub std: f64,
    pub interval_lo: f64,
    pub interval_hi: f64,
    pub level: f64,
    pub resamples: usize,
}

fn check_records(records: &[RunRecord]) -> Result<()> {
    let first = records.first().ok_or_else(|| LabError::Config("no run records to aggregate".into()))?;
    if let Some(r) = records.iter().find(|r| r.config.environment != first.config.environment) {
        return Err(LabError::Config(format!(
            "cannot aggregate runs on '{}' with runs on '{}'",
            r.config.environment, first.config.environment
        )));
    }
    Ok(())
}

/// Per-step mean and 90% normal interval over the steps every run reached.
pub fn summarize(records: &[RunRecord]) -> Result<Vec<SummaryRow>> {
    check_records(records)?;
    let n_rows = records.iter().map(|r| r.rows.len()).min().unwrap_or(0);
    (0..n_rows)
        .map(|i| {
            let step = records[0].rows[i].step;
            if records.iter().any(|r| r.rows[i].step != step) {
                return Err(LabError::Config("runs were evaluated at different steps".into()));
            }
            let xs: Vec<f64> = records.iter().map(|r| r.rows[i].return_mean).collect();
            let (ci_lo, ci_hi) = normal_ci90(&xs);
            Ok(SummaryRow { step, mean: mean(&xs), ci_lo, ci_hi })
        })
        .collect()
}

pub fn final_return_std(records: &[RunRecord]) -> Result<StdSummary> {
    check_records(records)?;
    let final_returns: Vec<f64> = records
        .iter()
        .map(|r| r.final_return().ok_or_else(|| LabError::Config("run has no evaluation rows".into())))
        .collect::<Result<_>>()?;
    let mut rng = stream_rng(BOOTSTRAP_SEED, 0);
    let level = 0.9;
    let (interval_lo, interval_hi) = bootstrap_std_interval(&final_returns, BOOTSTRAP_RESAMPLES, level, &mut rng);
    Ok(StdSummary {
        n_runs: records.len(),
        std: std_dev(&final_returns),
        final_returns,
        interval_lo,
        interval_hi,
        level,
        resamples: BOOTSTRAP_RESAMPLES,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn std_uses_bessel_correction() {
        assert!((std_dev(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(std_dev(&[4.0]), 0.0);
    }

    #[test]
    fn normal_interval_is_symmetric() {
        let (lo, hi) = normal_ci90(&[1.0, 2.0, 3.0]);
        assert!((lo + hi - 4.0).abs() < 1e-12);
        assert!((hi - 2.0 - Z90 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[0.0, 1.0, 2.0], 0.25), 0.5);
    }

    #[test]
    fn empty_records_rejected() {
        assert!(matches!(summarize(&[]), Err(LabError::Config(_))));
        assert!(final_return_std(&[]).is_err());
    }
}
