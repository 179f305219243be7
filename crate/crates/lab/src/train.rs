//! Single-run training loop and evaluation.

use epg_core::critic::{quadric_fit_hessian, CriticMode, QuadricCritic, StateValue, ValueCritic};
use epg_core::env::{clip_action, env_spec, make_env, Environment, ACTION_LIMIT};
use epg_core::quadrature::GaussHermite;
use epg_core::gradient::{
    dpg_step_gradient, exploration_root, gauss_gradient, ou_next, quadrature_gradient, spg_step_gradient,
    AdvantageSource, CovarianceOutput, Optimizer, OuState,
};
use epg_core::mdp::{EnvironmentSpec, Transition};
use epg_core::policy::{CovMode, GaussianPolicy};
use epg_core::{PolynomialFeatures, SymmetricMatrix};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, RunConfig};
use crate::error::{LabError, Result};

/// Independent RNG streams derived from the master seed.
pub mod streams {
    pub const POLICY_INIT: u64 = 0;
    pub const ENVIRONMENT: u64 = 1;
    pub const EXPLORATION: u64 = 2;
    pub const EVALUATION: u64 = 3;
    /// Quadric fits, quadrature and sarsa next-action draws.
    pub const CRITIC_AUX: u64 = 4;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub step: usize,
    pub return_mean: f64,
    pub return_min: f64,
    pub return_max: f64,
    /// Extremes of the `Σ^{1/2}` eigenvalues over the preceding training window.
    pub sig_eig_min: Option<f64>,
    pub sig_eig_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSample {
    pub state: Vec<f64>,
    pub eig_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub rows: Vec<EvalRow>,
    pub steps_completed: usize,
    pub final_theta: Vec<f64>,
    pub final_critic: Vec<f64>,
    /// Steps at which an exploration exponent hit the guard.
    pub clipped_steps: usize,
    #[serde(default)]
    pub exploration_log: Vec<ExplorationSample>,
    /// Set when training stopped early; the record is then partial.
    pub error: Option<String>,
}

impl RunRecord {
    pub fn final_return(&self) -> Option<f64> {
        self.rows.last().map(|r| r.return_mean)
    }
}

/// Seed of the evaluation environment; every pause replays the same starts.
pub fn evaluation_seed(cfg: &RunConfig) -> u64 {
    cfg.eval_seed.unwrap_or_else(|| stream_rng(cfg.seed, streams::EVALUATION).next_u64())
}

pub fn observe(s: &[f64], scale: &[f64]) -> Vec<f64> {
    s.iter().zip(scale).map(|(x, c)| x / c).collect()
}

/// Per-episode environment seeds; each evaluation episode owns its environment
/// so its start state does not depend on earlier episodes.
fn episode_seeds(eval_seed: u64, episodes: usize) -> Vec<u64> {
    let mut rng = stream_rng(eval_seed, 0);
    (0..episodes).map(|_| rng.next_u64()).collect()
}

pub fn evaluation_starts(cfg: &RunConfig) -> Result<Vec<Vec<f64>>> {
    episode_seeds(evaluation_seed(cfg), cfg.eval_episodes)
        .into_iter()
        .map(|seed| Ok(make_env(&cfg.environment, seed)?.reset()))
        .collect()
}

/// Undiscounted returns of the mean action over `episodes` fresh episodes;
/// the policy sees states divided elementwise by `scale`.
pub fn evaluate(
    policy: &GaussianPolicy,
    environment: &str,
    seed: u64,
    episodes: usize,
    scale: &[f64],
) -> Result<Vec<f64>> {
    episode_seeds(seed, episodes)
        .into_iter()
        .map(|episode_seed| {
            let mut env = make_env(environment, episode_seed)?;
            let mut s = env.reset();
            let mut total = 0.0;
            for _ in 0..env.spec().horizon {
                let (next, r) = env.step(&policy.mean(&observe(&s, scale)))?;
                total += r;
                s = next;
            }
            Ok(total)
        })
        .collect()
}

struct Window {
    lo: f64,
    hi: f64,
}

impl Window {
    fn empty() -> Self {
        Self { lo: f64::INFINITY, hi: f64::NEG_INFINITY }
    }

    fn push(&mut self, lo: f64, hi: f64) {
        self.lo = self.lo.min(lo);
        self.hi = self.hi.max(hi);
    }

    fn take(&mut self) -> Option<(f64, f64)> {
        let out = (self.lo <= self.hi).then_some((self.lo, self.hi));
        *self = Self::empty();
        out
    }
}

/// `E[Q̂(s, clip(a))]` for `a ~ N(μ, root²)`: closed form while every
/// Gauss–Hermite node stays inside the action box, quadrature otherwise.
fn clipped_expected_value(
    critic: &QuadricCritic,
    gh: &GaussHermite,
    s: &[f64],
    mu: &[f64],
    root: &SymmetricMatrix,
) -> Result<f64> {
    let z_max = gh.nodes.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let inside = (0..mu.len()).all(|i| {
        let reach: f64 = (0..mu.len()).map(|j| root.get(i, j).abs()).sum();
        mu[i].abs() + z_max * reach <= ACTION_LIMIT
    });
    if inside {
        let sigma = SymmetricMatrix::new(root.dim(), root.matmul(root))?;
        return Ok(critic.expected_value(s, mu, &sigma)?);
    }
    Ok(gh.expect(mu, root, |a, _| vec![critic.eval(s, &clip_action(a))])[0])
}

/// Hessian-driven exploration root at `s`; `None` for DPG and SPG.
fn exploration_at<R: Rng + ?Sized>(
    cfg: &RunConfig,
    policy: &GaussianPolicy,
    critic: &QuadricCritic,
    s: &[f64],
    rng: &mut R,
) -> Result<Option<CovarianceOutput>> {
    let h = match cfg.algorithm {
        Algorithm::EpgGauss => critic.action_hessian(s),
        Algorithm::EpgNumeric => {
            let mu = policy.mean(s);
            let n = cfg.numeric.samples(policy.action_dim);
            quadric_fit_hessian(|s, a| critic.eval(s, a), s, &mu, cfg.numeric.fit_radius, n, rng)?.hessian
        }
        Algorithm::DpgOu | Algorithm::Spg => return Ok(None),
    };
    Ok(Some(exploration_root(&h, &cfg.exploration)?))
}

struct Learner {
    cfg: RunConfig,
    spec: EnvironmentSpec,
    policy: GaussianPolicy,
    critic: QuadricCritic,
    value: Option<ValueCritic>,
    optimizer: Optimizer,
    ou: OuState,
    explore: ChaCha8Rng,
    aux: ChaCha8Rng,
    scale: Vec<f64>,
    gh: GaussHermite,
}

impl Learner {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let spec = env_spec(&cfg.environment)?;
        let features = PolynomialFeatures::new(spec.state_dim);
        let d = spec.action_dim;
        let cov_mode = match cfg.algorithm {
            Algorithm::Spg => CovMode::Fixed(SymmetricMatrix::scaled_identity(d, cfg.spg_covariance.sqrt())),
            _ => CovMode::HessianDriven,
        };
        let mut policy = GaussianPolicy::new(features, d, cov_mode)?;
        let mut init = stream_rng(cfg.seed, streams::POLICY_INIT);
        let scale = cfg.policy_init_scale;
        let n_mean = policy.n_mean_params();
        for w in &mut policy.theta[..n_mean] {
            *w = if scale > 0.0 { init.random_range(-scale..scale) } else { 0.0 };
        }
        let critic =
            if cfg.linear_critic { QuadricCritic::linear_only(features, d) } else { QuadricCritic::new(features, d) };
        let needs_value = cfg.algorithm == Algorithm::Spg
            && (cfg.critic.mode == CriticMode::TdAdvantage || cfg.critic.value_baseline);
        let optimizer = Optimizer::new(cfg.optimizer.clone(), policy.n_params());
        Ok(Self {
            cfg: cfg.clone(),
            ou: OuState::new(d, cfg.ou.psi, cfg.ou.sigma)?,
            value: needs_value.then(|| ValueCritic::new(features)),
            spec,
            policy,
            critic,
            optimizer,
            explore: stream_rng(cfg.seed, streams::EXPLORATION),
            aux: stream_rng(cfg.seed, streams::CRITIC_AUX),
            scale: cfg.observation_scale(),
            gh: GaussHermite::new(10)?,
        })
    }

    fn exploration(&mut self, s: &[f64]) -> Result<Option<CovarianceOutput>> {
        exploration_at(&self.cfg, &self.policy, &self.critic, s, &mut self.aux)
    }

    fn step_weight(&self, t: usize) -> f64 {
        if self.cfg.discount_weighted_updates {
            self.spec.gamma.powi(t as i32)
        } else {
            1.0
        }
    }

    /// One interaction step; returns the transition and the exploration root used.
    fn step(&mut self, env: &mut dyn Environment, t: usize) -> Result<(Transition, Option<CovarianceOutput>)> {
        let s = observe(env.state(), &self.scale);
        let w = self.step_weight(t);
        if self.cfg.algorithm == Algorithm::Spg {
            return self.spg_step(env, s, t, w).map(|tr| (tr, None));
        }
        let cov = self.exploration(&s)?;
        let g = match self.cfg.algorithm {
            Algorithm::EpgGauss => gauss_gradient(
                &self.policy,
                &self.critic,
                &s,
                cov.as_ref().map(|c| &c.root),
                self.cfg.entropy_alpha,
                w,
            )?,
            Algorithm::EpgNumeric => quadrature_gradient(
                &self.policy,
                &self.critic,
                &s,
                cov.as_ref().map(|c| &c.root),
                self.cfg.numeric.rule,
                w,
                &mut self.aux,
            )?,
            _ => dpg_step_gradient(&self.policy, &self.critic, &s, w)?,
        };
        self.optimizer.ascend(&mut self.policy.theta, &g.g);
        let action = match &cov {
            Some(c) => self.policy.sample_action(&s, Some(&c.root), &mut self.explore)?,
            None => {
                let (ou, n) = ou_next(&self.ou, &mut self.explore);
                self.ou = ou;
                self.policy.mean(&s).iter().zip(&n).map(|(m, e)| m + e).collect()
            }
        };
        let (next_state, reward) = env.step(&action)?;
        let next_state = observe(&next_state, &self.scale);
        let tr = Transition { state: s, action, reward, next_state, time_index: t };
        self.update_critic(&tr)?;
        Ok((tr, cov))
    }

    fn spg_step(&mut self, env: &mut dyn Environment, s: Vec<f64>, t: usize, w: f64) -> Result<Transition> {
        let action = self.policy.sample_action(&s, None, &mut self.explore)?;
        let (next_state, reward) = env.step(&action)?;
        let next_state = observe(&next_state, &self.scale);
        let tr = Transition { state: s, action, reward, next_state, time_index: t };
        let gamma = self.spec.gamma;
        let g = match (&self.value, self.cfg.critic.mode) {
            (Some(v), CriticMode::TdAdvantage) => spg_step_gradient(
                &self.policy,
                None,
                AdvantageSource::TdError { value: v, gamma },
                &tr,
                None,
                self.cfg.entropy_alpha,
                w,
            )?,
            (v, _) => spg_step_gradient(
                &self.policy,
                None,
                AdvantageSource::Critic(&self.critic),
                &tr,
                v.as_ref().map(|v| -v.value(&tr.state)),
                self.cfg.entropy_alpha,
                w,
            )?,
        };
        self.optimizer.ascend(&mut self.policy.theta, &g.g);
        if let Some(v) = &mut self.value {
            v.td_step(&tr, gamma, self.cfg.critic.learning_rate)?;
        }
        if self.cfg.critic.mode != CriticMode::TdAdvantage {
            self.update_critic(&tr)?;
        }
        Ok(tr)
    }

    /// Next-action marginal `(μ', Σ'^{1/2})` under the current policy.
    fn next_action_law(&mut self, s_next: &[f64]) -> Result<(Vec<f64>, SymmetricMatrix)> {
        let d = self.spec.action_dim;
        let mu = self.policy.mean(s_next);
        let root = match self.cfg.algorithm {
            Algorithm::Spg => self.policy.covariance_root(None)?,
            // the OU process is not a Markov policy; its target uses the mean action
            Algorithm::DpgOu => SymmetricMatrix::zeros(d),
            _ => self.exploration(s_next)?.expect("hessian-driven exploration").root,
        };
        Ok((mu, root))
    }

    /// The critic learns on the action the environment executed (after clipping),
    /// so it never extrapolates returns beyond the action box.
    fn update_critic(&mut self, tr: &Transition) -> Result<()> {
        let tr = &Transition { action: clip_action(&tr.action), ..tr.clone() };
        let gamma = self.spec.gamma;
        let (mu, root) = self.next_action_law(&tr.next_state)?;
        match self.cfg.critic.mode {
            CriticMode::ExpectedSarsa => {
                let next = clipped_expected_value(&self.critic, &self.gh, &tr.next_state, &mu, &root)?;
                self.critic.td_update(tr, tr.reward + gamma * next, &self.cfg.critic)?;
            }
            CriticMode::Sarsa => {
                let a_next = self.policy.sample_action(&tr.next_state, Some(&root), &mut self.aux)?;
                self.critic.sarsa_step(tr, &clip_action(&a_next), gamma, &self.cfg.critic)?;
            }
            CriticMode::TdAdvantage => {}
        }
        Ok(())
    }
}

fn eval_row(learner: &Learner, cfg: &RunConfig, step: usize, window: Option<(f64, f64)>) -> Result<EvalRow> {
    let returns =
        evaluate(&learner.policy, &cfg.environment, evaluation_seed(cfg), cfg.eval_episodes, &learner.scale)?;
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    if !mean.is_finite() {
        return Err(LabError::Run(format!("non-finite evaluation return at step {step}")));
    }
    Ok(EvalRow {
        step,
        return_mean: mean,
        return_min: returns.iter().cloned().fold(f64::INFINITY, f64::min),
        return_max: returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        sig_eig_min: window.map(|w| w.0),
        sig_eig_max: window.map(|w| w.1),
    })
}

/// Trains one agent. Configuration problems are errors; failures during
/// training yield a partial record with `error` set.
pub fn train(cfg: &RunConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let mut learner = Learner::new(cfg)?;
    let env_seed = stream_rng(cfg.seed, streams::ENVIRONMENT).next_u64();
    let mut env = make_env(&cfg.environment, env_seed)?;
    env.reset();
    let horizon = learner.spec.horizon;
    let spg_eig = cfg.spg_covariance.sqrt();
    let log_from = ((1.0 - cfg.exploration_log_tail) * cfg.total_steps as f64).ceil() as usize;
    let log_on = cfg.exploration_log_tail > 0.0 && matches!(cfg.algorithm, Algorithm::EpgGauss | Algorithm::EpgNumeric);

    let mut record = RunRecord {
        config: cfg.clone(),
        rows: Vec::with_capacity(cfg.total_steps / cfg.eval_every + 1),
        steps_completed: 0,
        final_theta: Vec::new(),
        final_critic: Vec::new(),
        clipped_steps: 0,
        exploration_log: Vec::new(),
        error: None,
    };
    let mut window = Window::empty();
    let mut t = 0;
    let result: Result<()> = (|| {
        for k in 0..=cfg.total_steps {
            if k % cfg.eval_every == 0 {
                let mut w = window.take();
                if w.is_none() {
                    w = match cfg.algorithm {
                        Algorithm::Spg => Some((spg_eig, spg_eig)),
                        Algorithm::DpgOu => None,
                        _ => {
                            // probe on a cloned stream so training draws are untouched
                            let mut rng = learner.aux.clone();
                            exploration_at(cfg, &learner.policy, &learner.critic, &observe(env.state(), &learner.scale), &mut rng)?
                                .map(|c| (c.eig_min, c.eig_max))
                        }
                    };
                }
                record.rows.push(eval_row(&learner, cfg, k, w)?);
            }
            if k == cfg.total_steps {
                break;
            }
            let raw = env.state().to_vec();
            let (_, cov) = learner.step(env.as_mut(), t)?;
            match (&cov, cfg.algorithm) {
                (Some(c), _) => {
                    window.push(c.eig_min, c.eig_max);
                    record.clipped_steps += c.clipped as usize;
                    if log_on && k >= log_from {
                        record.exploration_log.push(ExplorationSample { state: raw, eig_max: c.eig_max });
                    }
                }
                (None, Algorithm::Spg) => window.push(spg_eig, spg_eig),
                _ => {}
            }
            record.steps_completed = k + 1;
            t += 1;
            if t == horizon {
                env.reset();
                learner.ou.reset();
                t = 0;
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        if let LabError::Config(_) = e {
            return Err(e);
        }
        record.error = Some(e.to_string());
    }
    record.final_theta = learner.policy.theta.clone();
    record.final_critic = learner.critic.to_flat();
    Ok(record)
}

/// Worker count for sweeps: `EPG_LAB_THREADS` if set, else one per run.
pub fn sweep_threads(n_runs: usize) -> Result<usize> {
    match std::env::var("EPG_LAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(LabError::Config(format!("EPG_LAB_THREADS must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(n_runs.max(1)),
    }
}

/// Runs `cfg` once per seed, in parallel; records come back in seed order.
pub fn sweep(cfg: &RunConfig, seeds: &[u64]) -> Result<Vec<RunRecord>> {
    if seeds.is_empty() {
        return Err(LabError::Config("sweep needs at least one seed".into()));
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep_threads(seeds.len())?)
        .build()
        .map_err(|e| LabError::Run(format!("cannot start worker pool: {e}")))?;
    pool.install(|| seeds.par_iter().map(|&seed| train(&RunConfig { seed, ..cfg.clone() })).collect())
}

/// Parses `a..b` (inclusive) or a comma-separated list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || LabError::Config(format!("invalid seed list '{text}'"));
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        text.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    Ok(seeds)
}
