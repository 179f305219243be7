//! On-disk artefacts: `curve.csv` and `run.json` per run; `summary.csv` and
//! `std.json` per sweep.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::stats::{final_return_std, summarize};
use crate::train::RunRecord;

pub const CURVE_HEADER: &str = "step,return_mean,return_min,return_max,sig_eig_min,sig_eig_max";
pub const SUMMARY_HEADER: &str = "step,mean,ci_lo,ci_hi";

/// `%.9g`-style formatting: nine significant digits, trailing zeros trimmed.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        let s = format!("{x:.8e}");
        let (mantissa, e) = s.split_once('e').unwrap();
        format!("{}e{e}", trim(mantissa.to_string()))
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig9).unwrap_or_default()
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| LabError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))
}

pub fn curve_csv(record: &RunRecord) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in &record.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.step,
            sig9(r.return_mean),
            sig9(r.return_min),
            sig9(r.return_max),
            opt(r.sig_eig_min),
            opt(r.sig_eig_max)
        ));
    }
    out
}

/// Writes `curve.csv` and `run.json` into `dir`.
pub fn write_run(dir: &Path, record: &RunRecord) -> Result<()> {
    create_dir(dir)?;
    write(&dir.join("curve.csv"), &curve_csv(record))?;
    write_json(&dir.join("run.json"), record)
}

pub fn read_run(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn seed_dir(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}"))
}

/// Per-seed run outputs plus `summary.csv` and `std.json`.
pub fn write_sweep(dir: &Path, records: &[RunRecord]) -> Result<()> {
    let summary = summarize(records)?;
    let std = final_return_std(records)?;
    create_dir(dir)?;
    for r in records {
        write_run(&seed_dir(dir, r.config.seed), r)?;
    }
    let mut csv = String::from(SUMMARY_HEADER);
    csv.push('\n');
    for row in &summary {
        csv.push_str(&format!("{},{},{},{}\n", row.step, sig9(row.mean), sig9(row.ci_lo), sig9(row.ci_hi)));
    }
    write(&dir.join("summary.csv"), &csv)?;
    write_json(&dir.join("std.json"), &std)
}
