//! Policy-gradient estimators: single-sample SPG, DPG, and the expected
//! (integrated) gradient in closed form, by Taylor expansion, or by quadrature.
//! Also the Hessian-exponential exploration covariance and OU noise.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::critic::{quadric_fit_hessian, QuadricCritic, StateValue, ValueCritic};
use crate::error::{invalid, Error, Result};
use crate::linalg::{sym_exp, SymmetricMatrix};
use crate::mdp::Transition;
use crate::policy::GaussianPolicy;
use crate::quadrature::{monte_carlo_expect, GaussHermite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralMethod {
    /// Likelihood-ratio estimate from the sampled action.
    SingleSample,
    /// Critic gradient at the mean action.
    Dirac,
    /// Closed-form Gaussian integral of a quadric critic.
    Analytic,
    TaylorAnalytic,
    TaylorFit,
    GaussHermite,
    MonteCarlo,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: Option<IntegralMethod>,
    /// An exploration exponent hit the guard.
    #[serde(default)]
    pub clipped: bool,
    pub sigma_eig_min: Option<f64>,
    pub sigma_eig_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub g: Vec<f64>,
    /// The `γᵗ` factor already folded into `g`.
    pub step_weight: f64,
    pub diagnostics: Diagnostics,
}

impl GradientEstimate {
    fn new(mut g: Vec<f64>, step_weight: f64, method: IntegralMethod) -> Result<Self> {
        if step_weight != 1.0 {
            g.iter_mut().for_each(|x| *x *= step_weight);
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite gradient from {method:?} estimator")));
        }
        Ok(Self {
            g,
            step_weight,
            diagnostics: Diagnostics { method: Some(method), ..Diagnostics::default() },
        })
    }
}

/// A critic that can be queried for value, action gradient and action Hessian.
pub trait ActionCritic {
    fn value(&self, s: &[f64], a: &[f64]) -> f64;
    fn action_gradient(&self, s: &[f64], a: &[f64]) -> Vec<f64>;
    fn action_hessian_at(&self, s: &[f64], a: &[f64]) -> SymmetricMatrix;
}

impl ActionCritic for QuadricCritic {
    fn value(&self, s: &[f64], a: &[f64]) -> f64 {
        self.eval(s, a)
    }
    fn action_gradient(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        QuadricCritic::action_gradient(self, s, a)
    }
    fn action_hessian_at(&self, s: &[f64], _a: &[f64]) -> SymmetricMatrix {
        self.action_hessian(s)
    }
}

/// Black-box critic assembled from closures.
pub struct FnCritic<V, G, H> {
    pub value: V,
    pub gradient: G,
    pub hessian: H,
}

impl<V, G, H> ActionCritic for FnCritic<V, G, H>
where
    V: Fn(&[f64], &[f64]) -> f64,
    G: Fn(&[f64], &[f64]) -> Vec<f64>,
    H: Fn(&[f64], &[f64]) -> SymmetricMatrix,
{
    fn value(&self, s: &[f64], a: &[f64]) -> f64 {
        (self.value)(s, a)
    }
    fn action_gradient(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        (self.gradient)(s, a)
    }
    fn action_hessian_at(&self, s: &[f64], a: &[f64]) -> SymmetricMatrix {
        (self.hessian)(s, a)
    }
}

/// Scalar multiplying the score in the SPG estimator.
#[derive(Debug, Clone, Copy)]
pub enum AdvantageSource<'a> {
    /// `Q̂(s, a) + b(s)`.
    Critic(&'a QuadricCritic),
    /// TD error `r + γ V̂(s') - V̂(s)`; the baseline is implicit.
    TdError { value: &'a ValueCritic, gamma: f64 },
}

/// `w ∇_θ log π(a_t|s_t) (Q̂(s_t, a_t) + b(s_t) - α log π(a_t|s_t))`.
pub fn spg_step_gradient(
    policy: &GaussianPolicy,
    external_root: Option<&SymmetricMatrix>,
    source: AdvantageSource<'_>,
    t: &Transition,
    baseline: Option<f64>,
    entropy_alpha: f64,
    step_weight: f64,
) -> Result<GradientEstimate> {
    let score = policy.log_prob_grad(&t.state, &t.action, external_root)?;
    let mut scalar = match source {
        AdvantageSource::Critic(q) => q.eval(&t.state, &t.action) + baseline.unwrap_or(0.0),
        AdvantageSource::TdError { value, gamma } => {
            t.reward + gamma * value.value(&t.next_state) - value.value(&t.state)
        }
    };
    if entropy_alpha != 0.0 {
        scalar -= entropy_alpha * policy.log_density(&t.state, &t.action, external_root)?;
    }
    let g = score.into_iter().map(|x| x * scalar).collect();
    GradientEstimate::new(g, step_weight, IntegralMethod::SingleSample)
}

/// The two blocks of the closed-form Gaussian integral, each full θ length.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussIntegral {
    pub mean_block: Vec<f64>,
    /// Zero unless the covariance is parameterized.
    pub cov_block: Vec<f64>,
}

impl GaussIntegral {
    pub fn total(&self) -> Vec<f64> {
        self.mean_block.iter().zip(&self.cov_block).map(|(a, b)| a + b).collect()
    }
}

/// `∫ dπ ∇log π Q̂` for a quadric critic: `J_μᵀ(2Aμ + B)` and `∇Σ^{1/2} · 2AΣ^{1/2}`.
pub fn do_integral_gauss(
    policy: &GaussianPolicy,
    critic: &QuadricCritic,
    s: &[f64],
    external_root: Option<&SymmetricMatrix>,
) -> Result<GaussIntegral> {
    check_dims(policy, critic.action_dim)?;
    let phi = policy.features.eval(s);
    let mu = policy.mean_from_features(&phi);
    let coef = critic.coefficients(s);
    let grad = coef.gradient(&mu);
    let mut mean_block = vec![0.0; policy.n_params()];
    policy.add_mean_pullback(&phi, &grad, 1.0, &mut mean_block);
    let cov_block = if policy.log_std().is_some() {
        let root = policy.covariance_root(external_root)?;
        // only the diagonal matters for the diagonal root, so symmetrizing is harmless
        let m = SymmetricMatrix::new(root.dim(), coef.a.scaled(2.0).matmul(&root))?;
        policy.covariance_pullback(&m)
    } else {
        vec![0.0; policy.n_params()]
    };
    Ok(GaussIntegral { mean_block, cov_block })
}

fn check_dims(policy: &GaussianPolicy, critic_action_dim: usize) -> Result<()> {
    if policy.action_dim != critic_action_dim {
        return Err(invalid("policy and critic action dimensions differ"));
    }
    Ok(())
}

/// Full closed-form gradient with entropy bonus, weighted by `step_weight`.
pub fn gauss_gradient(
    policy: &GaussianPolicy,
    critic: &QuadricCritic,
    s: &[f64],
    external_root: Option<&SymmetricMatrix>,
    entropy_alpha: f64,
    step_weight: f64,
) -> Result<GradientEstimate> {
    let mut g = do_integral_gauss(policy, critic, s, external_root)?.total();
    if entropy_alpha != 0.0 {
        for (x, e) in g.iter_mut().zip(policy.entropy_grad(s)) {
            *x += entropy_alpha * e;
        }
    }
    GradientEstimate::new(g, step_weight, IntegralMethod::Analytic)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HessianSource {
    /// Critic-supplied gradient and Hessian at the mean.
    Analytic,
    /// Local least-squares quadric fit around the mean.
    QuadricFit { radius: f64, n_samples: usize },
}

/// Second-order Taylor approximation of the integral around `μ_s`.
pub fn epg_taylor_gradient<C, R>(
    policy: &GaussianPolicy,
    q: &C,
    s: &[f64],
    source: HessianSource,
    external_root: Option<&SymmetricMatrix>,
    rng: &mut R,
) -> Result<GradientEstimate>
where
    C: ActionCritic + ?Sized,
    R: Rng + ?Sized,
{
    let phi = policy.features.eval(s);
    let mu = policy.mean_from_features(&phi);
    let (grad, hess, method) = match source {
        HessianSource::Analytic => {
            (q.action_gradient(s, &mu), q.action_hessian_at(s, &mu), IntegralMethod::TaylorAnalytic)
        }
        HessianSource::QuadricFit { radius, n_samples } => {
            let fit = quadric_fit_hessian(|s: &[f64], a: &[f64]| q.value(s, a), s, &mu, radius, n_samples, rng)?;
            (fit.gradient, fit.hessian, IntegralMethod::TaylorFit)
        }
    };
    if grad.len() != policy.action_dim || hess.dim() != policy.action_dim {
        return Err(invalid("critic derivatives have the wrong dimension"));
    }
    let mut g = vec![0.0; policy.n_params()];
    policy.add_mean_pullback(&phi, &grad, 1.0, &mut g);
    if policy.log_std().is_some() {
        let root = policy.covariance_root(external_root)?;
        let m = SymmetricMatrix::new(root.dim(), hess.matmul(&root))?;
        for (x, c) in g.iter_mut().zip(policy.covariance_pullback(&m)) {
            *x += c;
        }
    }
    GradientEstimate::new(g, 1.0, method)
}

/// `w J_μ(s)ᵀ ∇_a Q̂(μ_s, s)`.
pub fn dpg_step_gradient<C: ActionCritic + ?Sized>(
    policy: &GaussianPolicy,
    critic: &C,
    s: &[f64],
    step_weight: f64,
) -> Result<GradientEstimate> {
    let phi = policy.features.eval(s);
    let mu = policy.mean_from_features(&phi);
    let grad = critic.action_gradient(s, &mu);
    if grad.len() != policy.action_dim {
        return Err(invalid("critic gradient has the wrong dimension"));
    }
    let mut g = vec![0.0; policy.n_params()];
    policy.add_mean_pullback(&phi, &grad, 1.0, &mut g);
    GradientEstimate::new(g, step_weight, IntegralMethod::Dirac)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum QuadratureRule {
    GaussHermite { order: usize },
    MonteCarlo { samples: usize },
}

impl QuadratureRule {
    /// Order-10 tensor Gauss–Hermite up to three action dimensions, else 10⁴ samples.
    pub fn default_for(action_dim: usize) -> Self {
        if action_dim <= 3 {
            Self::GaussHermite { order: 10 }
        } else {
            Self::MonteCarlo { samples: 10_000 }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureEstimate {
    pub value: Vec<f64>,
    /// Per-component standard error (Monte Carlo only).
    pub std_error: Option<Vec<f64>>,
}

/// Numerical `∫ dπ(a|s) ∇_θ log π(a|s) (q(s, a) + b)` over all of θ.
pub fn score_integral<Q, R>(
    policy: &GaussianPolicy,
    q: Q,
    s: &[f64],
    baseline: f64,
    external_root: Option<&SymmetricMatrix>,
    rule: QuadratureRule,
    rng: &mut R,
) -> Result<QuadratureEstimate>
where
    Q: Fn(&[f64], &[f64]) -> f64,
    R: Rng + ?Sized,
{
    let d = policy.action_dim;
    let root = policy.covariance_root(external_root)?;
    let (prec, _) = policy.precision(&root)?;
    let phi = policy.features.eval(s);
    let mu = policy.mean_from_features(&phi);
    let n = policy.n_params();
    let off = policy.n_mean_params();
    let parameterized = policy.log_std().is_some();
    let integrand = |a: &[f64], z: &[f64]| {
        let w = q(s, a) + baseline;
        let diff: Vec<f64> = a.iter().zip(&mu).map(|(x, m)| x - m).collect();
        let mut g = vec![0.0; n];
        policy.add_mean_pullback(&phi, &prec.matvec(&diff), w, &mut g);
        if parameterized {
            for j in 0..d {
                g[off + j] = w * (z[j] * z[j] - 1.0);
            }
        }
        g
    };
    match rule {
        QuadratureRule::GaussHermite { order } => {
            if d > 3 {
                return Err(invalid("tensor Gauss-Hermite is limited to three action dimensions"));
            }
            let gh = GaussHermite::new(order)?;
            Ok(QuadratureEstimate { value: gh.expect(&mu, &root, integrand), std_error: None })
        }
        QuadratureRule::MonteCarlo { samples } => {
            if samples < 2 {
                return Err(invalid("Monte Carlo needs at least two samples"));
            }
            let est = monte_carlo_expect(&mu, &root, samples, rng, integrand);
            Ok(QuadratureEstimate { value: est.mean, std_error: Some(est.std_error) })
        }
    }
}

/// Quadrature fallback for critics without a closed-form integral.
pub fn quadrature_gradient<C, R>(
    policy: &GaussianPolicy,
    q: &C,
    s: &[f64],
    external_root: Option<&SymmetricMatrix>,
    rule: QuadratureRule,
    step_weight: f64,
    rng: &mut R,
) -> Result<GradientEstimate>
where
    C: ActionCritic + ?Sized,
    R: Rng + ?Sized,
{
    let est = score_integral(policy, |s: &[f64], a: &[f64]| q.value(s, a), s, 0.0, external_root, rule, rng)?;
    let method = match rule {
        QuadratureRule::GaussHermite { .. } => IntegralMethod::GaussHermite,
        QuadratureRule::MonteCarlo { .. } => IntegralMethod::MonteCarlo,
    };
    GradientEstimate::new(est.value, step_weight, method)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuState {
    pub n: Vec<f64>,
    pub psi: f64,
    pub sigma: f64,
}

impl OuState {
    pub fn new(dim: usize, psi: f64, sigma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&psi) {
            return Err(Error::Config(format!("OU psi must lie in [0, 1), got {psi}")));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Config(format!("OU sigma must be non-negative, got {sigma}")));
        }
        Ok(Self { n: vec![0.0; dim], psi, sigma })
    }

    pub fn reset(&mut self) {
        self.n.iter_mut().for_each(|x| *x = 0.0);
    }
}

/// `n_i = -ψ n_{i-1} + σ z`.
pub fn ou_next<R: Rng + ?Sized>(o: &OuState, rng: &mut R) -> (OuState, Vec<f64>) {
    let n: Vec<f64> = o
        .n
        .iter()
        .map(|&x| {
            let z: f64 = rng.sample(StandardNormal);
            -o.psi * x + o.sigma * z
        })
        .collect();
    (OuState { n: n.clone(), psi: o.psi, sigma: o.sigma }, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationConfig {
    pub sigma0_sq: f64,
    pub c: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self { sigma0_sq: 0.2, c: 1.0 }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0_sq > 0.0 && self.sigma0_sq.is_finite()) || !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!(
                "exploration sigma0_sq and c must be positive, got {} and {}",
                self.sigma0_sq, self.c
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceOutput {
    /// `Σ^{1/2}`.
    pub root: SymmetricMatrix,
    pub clipped: bool,
    pub eig_min: f64,
    pub eig_max: f64,
}

/// `Σ^{1/2} = σ₀² exp(c H)`.
pub fn exploration_root(h: &SymmetricMatrix, cfg: &ExplorationConfig) -> Result<CovarianceOutput> {
    let e = sym_exp(h, cfg.c)?;
    let eigs: Vec<f64> = e.eigenvalues.iter().map(|l| cfg.sigma0_sq * l).collect();
    Ok(CovarianceOutput {
        root: e.matrix.scaled(cfg.sigma0_sq),
        clipped: e.clipped,
        eig_min: eigs[0],
        eig_max: *eigs.last().unwrap(),
    })
}

/// Exploration root from the critic's action Hessian at `μ_s`.
pub fn get_covariance<C: ActionCritic + ?Sized>(
    critic: &C,
    s: &[f64],
    mu: &[f64],
    cfg: &ExplorationConfig,
) -> Result<CovarianceOutput> {
    exploration_root(&critic.action_hessian_at(s, mu), cfg)
}

/// `(I + h/n)ⁿ · sigma_sqrt0` by repeated multiplication (generally not symmetric).
pub fn covariance_iteration(sigma_sqrt0: &SymmetricMatrix, h: &SymmetricMatrix, n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(invalid("iteration count must be at least 1"));
    }
    if sigma_sqrt0.dim() != h.dim() {
        return Err(invalid("dimension mismatch"));
    }
    let d = h.dim();
    let step = DMatrix::identity(d, d) + h.to_dmatrix() / n as f64;
    let mut m = sigma_sqrt0.to_dmatrix();
    for _ in 0..n {
        m = &step * m;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { kind: OptimizerKind::Adam, step_size: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step_size > 0.0
            && self.step_size.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::Config("invalid optimiser settings".into()));
        }
        Ok(())
    }
}

/// Gradient-ascent optimiser state.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, n_params: usize) -> Self {
        Self { cfg, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    /// `θ ← θ + step(g)`.
    pub fn ascend(&mut self, theta: &mut [f64], g: &[f64]) {
        let c = &self.cfg;
        match c.kind {
            OptimizerKind::Sgd => {
                for (x, gi) in theta.iter_mut().zip(g) {
                    *x += c.step_size * gi;
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let b1t = 1.0 - c.beta1.powf(self.t as f64);
                let b2t = 1.0 - c.beta2.powf(self.t as f64);
                for i in 0..theta.len() {
                    self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g[i];
                    self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g[i] * g[i];
                    let mh = self.m[i] / b1t;
                    let vh = self.v[i] / b2t;
                    theta[i] += c.step_size * mh / (vh.sqrt() + c.epsilon);
                }
            }
        }
    }
}
