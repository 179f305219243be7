//! Independent numerical oracles and identity checks.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub mod checks;
pub mod finite;
pub mod lqr;

pub use checks::{quadrature_oracle, run_suite, Suite};
pub use finite::{
    exact_return_gradient, random_mdp, theorem1_check, variance_comparison_exact, SoftmaxTabularPolicy,
};
pub use lqr::{lqr_optimal_return, lqr_policy_gradient_check, LqrModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The check's hypothesis does not hold on this instance.
    Skipped,
}

impl CheckStatus {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub status: CheckStatus,
    pub error: f64,
    pub tolerance: f64,
    pub runtime_secs: f64,
    #[serde(default)]
    pub detail: String,
}

impl VerificationReport {
    /// Runs `f`, which returns `(error, status, detail)`, and records its runtime.
    /// Errors raised inside `f` become failed reports.
    pub fn timed<F>(name: &str, tolerance: f64, f: F) -> Result<Self>
    where
        F: FnOnce() -> Result<(f64, CheckStatus, String)>,
    {
        let start = Instant::now();
        let (error, status, detail) = match f() {
            Ok(x) => x,
            Err(e) => (f64::MAX, CheckStatus::Fail, e.to_string()),
        };
        Ok(Self {
            name: name.to_string(),
            status,
            error: if error.is_finite() { error.abs() } else { f64::MAX },
            tolerance: tolerance.abs(),
            runtime_secs: start.elapsed().as_secs_f64(),
            detail,
        })
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Fail
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}
