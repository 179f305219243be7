use std::path::Path;

use epg_core::critic::{default_fit_samples, CriticMode, CriticUpdateConfig, DEFAULT_FIT_RADIUS};
use epg_core::env::env_spec;
use epg_core::gradient::{ExplorationConfig, OptimizerConfig, QuadratureRule};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Closed-form Gaussian integral with Hessian-exponential exploration.
    EpgGauss,
    /// Numerical integral; exploration from a fitted local Hessian.
    EpgNumeric,
    DpgOu,
    Spg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuConfig {
    pub psi: f64,
    pub sigma: f64,
}

impl Default for OuConfig {
    fn default() -> Self {
        Self { psi: 0.15, sigma: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericConfig {
    pub rule: QuadratureRule,
    pub fit_radius: f64,
    /// Defaults to four times the quadric coefficient count.
    pub fit_samples: Option<usize>,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self { rule: QuadratureRule::GaussHermite { order: 10 }, fit_radius: DEFAULT_FIT_RADIUS, fit_samples: None }
    }
}

impl NumericConfig {
    pub fn samples(&self, action_dim: usize) -> usize {
        self.fit_samples.unwrap_or_else(|| default_fit_samples(action_dim))
    }
}

fn default_eval_episodes() -> usize {
    10
}

fn default_true() -> bool {
    true
}

fn default_spg_covariance() -> f64 {
    0.2
}

fn default_init_scale() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub environment: String,
    pub total_steps: usize,
    pub eval_every: usize,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub seed: u64,
    /// Fixed seed for evaluation start states, shared across runs when set.
    #[serde(default)]
    pub eval_seed: Option<u64>,
    #[serde(default)]
    pub exploration: ExplorationConfig,
    #[serde(default)]
    pub ou: OuConfig,
    #[serde(default)]
    pub critic: CriticUpdateConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub numeric: NumericConfig,
    /// Diagonal action covariance of the SPG policy (a variance, not a std).
    #[serde(default = "default_spg_covariance")]
    pub spg_covariance: f64,
    #[serde(default)]
    pub entropy_alpha: f64,
    #[serde(default = "default_true")]
    pub discount_weighted_updates: bool,
    /// Forces the critic curvature to zero.
    #[serde(default)]
    pub linear_critic: bool,
    /// Half-width of the uniform initial mean weights.
    #[serde(default = "default_init_scale")]
    pub policy_init_scale: f64,
    /// Log `(state, max Σ^{1/2} eigenvalue)` over this trailing fraction of training.
    #[serde(default)]
    pub exploration_log_tail: f64,
    /// Policy and critic see `state / observation_scale`; defaults per environment.
    #[serde(default)]
    pub observation_scale: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, environment: &str, total_steps: usize, eval_every: usize) -> Self {
        Self {
            algorithm,
            environment: environment.to_string(),
            total_steps,
            eval_every,
            eval_episodes: default_eval_episodes(),
            seed: 0,
            eval_seed: None,
            exploration: ExplorationConfig::default(),
            ou: OuConfig::default(),
            critic: CriticUpdateConfig::default(),
            optimizer: OptimizerConfig::default(),
            numeric: NumericConfig::default(),
            spg_covariance: default_spg_covariance(),
            entropy_alpha: 0.0,
            discount_weighted_updates: true,
            linear_critic: false,
            policy_init_scale: default_init_scale(),
            exploration_log_tail: 0.0,
            observation_scale: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let spec = env_spec(&self.environment).map_err(|e| LabError::Config(e.to_string()))?;
        let bad = |m: String| Err(LabError::Config(m));
        if self.eval_every == 0 {
            return bad("eval_every must be at least 1".into());
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be at least 1".into());
        }
        if !(self.spg_covariance > 0.0 && self.spg_covariance.is_finite()) {
            return bad(format!("spg_covariance must be positive, got {}", self.spg_covariance));
        }
        if !self.entropy_alpha.is_finite() || self.entropy_alpha < 0.0 {
            return bad(format!("entropy_alpha must be non-negative, got {}", self.entropy_alpha));
        }
        if !(0.0..=1.0).contains(&self.exploration_log_tail) {
            return bad("exploration_log_tail must lie in [0, 1]".into());
        }
        if !(self.policy_init_scale >= 0.0 && self.policy_init_scale.is_finite()) {
            return bad("policy_init_scale must be non-negative".into());
        }
        if !(self.numeric.fit_radius > 0.0) {
            return bad("numeric.fit_radius must be positive".into());
        }
        if self.critic.mode == CriticMode::TdAdvantage && self.algorithm != Algorithm::Spg {
            return bad("td_advantage critics are only available to spg".into());
        }
        if let Some(scale) = &self.observation_scale {
            if scale.len() != spec.state_dim || scale.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
                return bad(format!("observation_scale needs {} positive entries", spec.state_dim));
            }
        }
        let core = |e: epg_core::Error| LabError::Config(e.to_string());
        self.exploration.validate().map_err(core)?;
        self.critic.validate().map_err(core)?;
        self.optimizer.validate().map_err(core)?;
        epg_core::gradient::OuState::new(spec.action_dim, self.ou.psi, self.ou.sigma).map_err(core)?;
        Ok(())
    }

    /// Per-dimension state scale: `[π, 8]` (angle, max speed) on `pendulum1d`, else ones.
    pub fn observation_scale(&self) -> Vec<f64> {
        if let Some(s) = &self.observation_scale {
            return s.clone();
        }
        match self.environment.as_str() {
            "pendulum1d" => vec![std::f64::consts::PI, epg_core::env::Pendulum1d::MAX_SPEED],
            _ => vec![1.0; env_spec(&self.environment).map(|s| s.state_dim).unwrap_or(0)],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| LabError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            LabError::Config(m) => LabError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_gets_defaults() {
        let cfg = RunConfig::from_json(
            r#"{"algorithm": "epg_gauss", "environment": "lqr2d", "total_steps": 100, "eval_every": 10}"#,
        )
        .unwrap();
        assert_eq!(cfg.exploration.sigma0_sq, 0.2);
        assert_eq!(cfg.exploration.c, 1.0);
        assert_eq!(cfg.ou, OuConfig { psi: 0.15, sigma: 0.2 });
        assert_eq!(cfg.spg_covariance, 0.2);
        assert!(cfg.discount_weighted_updates);
        assert_eq!(cfg.optimizer.step_size, 1e-3);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = RunConfig::new(Algorithm::Spg, "lqr2d", 10, 5);
        let mut c = base.clone();
        c.environment = "cartpole".into();
        assert!(matches!(c.validate(), Err(LabError::Config(_))));
        let mut c = base.clone();
        c.eval_every = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.algorithm = Algorithm::EpgGauss;
        c.critic.mode = CriticMode::TdAdvantage;
        assert!(c.validate().is_err());
        assert!(RunConfig::from_json(r#"{"algorithm": "epg_gauss"}"#).is_err());
        assert!(RunConfig::from_json(
            r#"{"algorithm": "spg", "environment": "lqr2d", "total_steps": 1, "eval_every": 1, "bogus": 1}"#
        )
        .is_err());
    }
}
