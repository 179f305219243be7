//! Acceptance suite: one `PASS`/`FAIL` line per criterion.
//!
//! Run with `cargo test -p epg-lab --test acceptance -- --nocapture --test-threads 1`
//! to see the lines in order.

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use epg_core::env::normalize_angle;
use epg_core::verification::{lqr_optimal_return, run_suite, CheckStatus, LqrModel, Suite, VerificationReport};
use epg_lab::output::write_run;
use epg_lab::stats::std_dev;
use epg_lab::train::{evaluation_starts, sweep};
use epg_lab::{train, Algorithm, RunConfig, RunRecord};

fn config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&path).unwrap()
}

fn report_line(id: u32, name: &str, ok: bool, elapsed: Duration, detail: &str) {
    println!(
        "\n{} [{id:>2}] {name:<34} ({:.1}s) {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
}

static SUITE: OnceLock<Vec<VerificationReport>> = OnceLock::new();

fn suite() -> &'static [VerificationReport] {
    SUITE.get_or_init(|| run_suite(Suite::All, 0).unwrap())
}

/// Checks that every named report passed within its time budget.
fn suite_criterion(id: u32, label: &str, names: &[&str], budget_secs: f64) {
    let reports = suite();
    let mut ok = true;
    let mut details = Vec::new();
    let mut total = 0.0;
    for name in names {
        match reports.iter().find(|r| r.name == *name) {
            Some(r) => {
                ok &= r.status == CheckStatus::Pass;
                total += r.runtime_secs;
                details.push(format!("{name}: {:?} error {:.2e} tol {:.0e}", r.status, r.error, r.tolerance));
            }
            None => {
                ok = false;
                details.push(format!("{name}: missing"));
            }
        }
    }
    ok &= total < budget_secs;
    report_line(id, label, ok, Duration::from_secs_f64(total), &details.join("; "));
    assert!(ok, "{label}: {}", details.join("; "));
}

#[test]
fn c01_policy_gradient_identity() {
    suite_criterion(1, "policy gradient identity", &["policy_gradient_identity"], 60.0);
}

#[test]
fn c02_gaussian_integral_exactness() {
    suite_criterion(2, "gaussian integral exactness", &["gaussian_integral_exactness"], 10.0);
}

#[test]
fn c03_dpg_gpg_identity() {
    suite_criterion(3, "dpg/gpg mean-block identity", &["dpg_mean_block_identity"], 5.0);
}

#[test]
fn c04_exploration_limit() {
    suite_criterion(4, "exploration product limit", &["exploration_limit"], 10.0);
}

#[test]
fn c05_variance_dominance() {
    suite_criterion(5, "variance dominance", &["variance_dominance"], 120.0);
}

#[test]
fn c06_gradient_checks() {
    suite_criterion(
        6,
        "finite-difference gradient checks",
        &["log_prob_grad_fd", "entropy_grad_fd", "mean_jacobian_fd", "return_gradient_fd"],
        30.0,
    );
}

fn within(ret: f64, optimum: f64, rel: f64) -> bool {
    (ret - optimum).abs() <= rel * optimum.abs()
}

fn finals(records: &[RunRecord]) -> Vec<f64> {
    records.iter().map(|r| if r.error.is_none() { r.final_return().unwrap_or(f64::NAN) } else { f64::NAN }).collect()
}

#[test]
fn c07_learning_on_lqr2d() {
    let start = Instant::now();
    let epg_cfg = config("lqr2d_epg.json");
    let dpg_cfg = config("lqr2d_dpg.json");
    assert_eq!(epg_cfg.algorithm, Algorithm::EpgGauss);
    assert_eq!(dpg_cfg.algorithm, Algorithm::DpgOu);
    assert!(epg_cfg.total_steps <= 200_000);
    let optimum =
        lqr_optimal_return(&LqrModel::lqr2d(), 100, &evaluation_starts(&epg_cfg).unwrap()).unwrap();
    let seeds: Vec<u64> = (0..10).collect();
    let epg = finals(&sweep(&epg_cfg, &seeds).unwrap());
    let dpg = finals(&sweep(&dpg_cfg, &seeds).unwrap());
    let epg_hits = epg.iter().filter(|r| within(**r, optimum, 0.05)).count();
    let dpg_hits = dpg.iter().filter(|r| within(**r, optimum, 0.05)).count();
    let (epg_std, dpg_std) = (std_dev(&epg), std_dev(&dpg));
    let elapsed = start.elapsed();
    let ok = epg_hits >= 8 && dpg_hits >= 8 && epg_std <= dpg_std && elapsed < Duration::from_secs(15 * 60);
    let detail = format!(
        "optimum {optimum:.4}; epg within 5%: {epg_hits}/10, dpg: {dpg_hits}/10; std epg {epg_std:.4} <= dpg {dpg_std:.4}"
    );
    report_line(7, "lqr2d learning", ok, elapsed, &detail);
    assert!(ok, "{detail}; epg {epg:?}; dpg {dpg:?}");
}

#[test]
fn c08_exploration_shrinks_near_the_maximum() {
    let start = Instant::now();
    let cfg = config("pendulum_exploration.json");
    let records = sweep(&cfg, &[0, 1, 2, 3]).unwrap();
    let (mut up, mut down) = (Vec::new(), Vec::new());
    for r in &records {
        assert!(r.error.is_none(), "seed {}: {:?}", r.config.seed, r.error);
        for s in &r.exploration_log {
            let angle = normalize_angle(s.state[0]).abs();
            if angle < 0.1 {
                up.push(s.eig_max);
            } else if angle > std::f64::consts::PI - 0.5 {
                down.push(s.eig_max);
            }
        }
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (m_up, m_down) = (mean(&up), mean(&down));
    let elapsed = start.elapsed();
    let ok = !up.is_empty() && !down.is_empty() && m_up < m_down && elapsed < Duration::from_secs(10 * 60);
    let detail = format!(
        "mean max eigenvalue upright {m_up:.4} ({} samples) vs bottom {m_down:.4} ({} samples)",
        up.len(),
        down.len()
    );
    report_line(8, "pendulum exploration modulation", ok, elapsed, &detail);
    assert!(ok, "{detail}");
}

#[test]
fn c09_hessian_fit_oracle() {
    suite_criterion(9, "hessian fit oracle", &["quadric_fit_exact", "quadric_fit_quartic_scaling"], 10.0);
}

#[test]
fn c10_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    for alg in [Algorithm::EpgGauss, Algorithm::EpgNumeric, Algorithm::DpgOu, Algorithm::Spg] {
        for env in ["lqr2d", "pendulum1d"] {
            let mut cfg = RunConfig::new(alg, env, 2000, 500);
            cfg.seed = 17;
            cfg.eval_episodes = 3;
            let mut curves = Vec::new();
            for rep in 0..2 {
                let out = dir.path().join(format!("{alg:?}_{env}_{rep}"));
                write_run(&out, &train(&cfg).unwrap()).unwrap();
                curves.push(std::fs::read(out.join("curve.csv")).unwrap());
            }
            if curves[0] != curves[1] {
                mismatched.push(format!("{alg:?}/{env}"));
            }
        }
    }
    let ok = mismatched.is_empty();
    let detail = if ok { "byte-identical curve.csv for 4 algorithms x 2 environments".to_string() } else {
        format!("differs: {}", mismatched.join(", "))
    };
    report_line(10, "determinism", ok, start.elapsed(), &detail);
    assert!(ok, "{detail}");
}
