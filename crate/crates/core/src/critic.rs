//! Quadric-in-action critic `Q̂(a, s) = aᵀA(s)a + aᵀB(s) + c(s)` and its updaters.
//!
//! Each coefficient map is linear in the polynomial state features:
//! `A(s) = Σ_k φ_k(s) A_k`, `B(s) = W_B φ(s)`, `c(s) = w_cᵀ φ(s)`.
//! Updates add scaled multiples of `a aᵀ` to every `A_k`, so `A(s)` stays
//! exactly symmetric.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::features::PolynomialFeatures;
use crate::linalg::{dot, gaussian_quadric_expectation, SymmetricMatrix};
use crate::mdp::Transition;
use crate::policy::GaussianPolicy;

/// Initial curvature `A(s)` on the bias feature.
pub const INITIAL_CURVATURE: f64 = -0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticMode {
    Sarsa,
    ExpectedSarsa,
    /// State-value critic whose TD error stands in for the advantage (SPG only).
    TdAdvantage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticUpdateConfig {
    pub learning_rate: f64,
    pub mode: CriticMode,
    /// Use `b(s) = -V̂(s)` in the SPG estimator.
    #[serde(default)]
    pub value_baseline: bool,
    /// Divide each step by `1 + ‖∇_w Q̂(s, a)‖²` (normalized LMS), which keeps
    /// large polynomial features from destabilizing TD.
    #[serde(default)]
    pub normalized: bool,
}

impl Default for CriticUpdateConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, mode: CriticMode::ExpectedSarsa, value_baseline: false, normalized: false }
    }
}

impl CriticUpdateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "critic learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Quadric coefficients at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadricCoefficients {
    pub a: SymmetricMatrix,
    pub b: Vec<f64>,
    pub c: f64,
}

impl QuadricCoefficients {
    pub fn eval(&self, action: &[f64]) -> f64 {
        self.a.quad_form(action) + dot(action, &self.b) + self.c
    }

    /// `∇_a Q̂ = 2 A a + B`.
    pub fn gradient(&self, action: &[f64]) -> Vec<f64> {
        self.a.matvec(action).iter().zip(&self.b).map(|(x, b)| 2.0 * x + b).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadricCritic {
    pub features: PolynomialFeatures,
    pub action_dim: usize,
    /// One `A_k` per feature.
    pub curvature: Vec<SymmetricMatrix>,
    /// `W_B`, row-major `action_dim x n_features`.
    pub linear: Vec<f64>,
    pub offset: Vec<f64>,
    /// Keeps `A ≡ 0` (linear-in-action critic).
    #[serde(default)]
    pub linear_only: bool,
}

impl QuadricCritic {
    /// All weights zero except `A_bias = -0.1 I`.
    pub fn new(features: PolynomialFeatures, action_dim: usize) -> Self {
        let mut q = Self::zeros(features, action_dim);
        q.curvature[0] = SymmetricMatrix::scaled_identity(action_dim, INITIAL_CURVATURE);
        q
    }

    pub fn zeros(features: PolynomialFeatures, action_dim: usize) -> Self {
        let nf = features.len();
        Self {
            features,
            action_dim,
            curvature: vec![SymmetricMatrix::zeros(action_dim); nf],
            linear: vec![0.0; action_dim * nf],
            offset: vec![0.0; nf],
            linear_only: false,
        }
    }

    pub fn linear_only(features: PolynomialFeatures, action_dim: usize) -> Self {
        Self { linear_only: true, ..Self::zeros(features, action_dim) }
    }

    pub fn coefficients(&self, s: &[f64]) -> QuadricCoefficients {
        self.coefficients_from_features(&self.features.eval(s))
    }

    fn coefficients_from_features(&self, phi: &[f64]) -> QuadricCoefficients {
        let d = self.action_dim;
        let nf = phi.len();
        let mut a = SymmetricMatrix::zeros(d);
        if !self.linear_only {
            for (ak, &p) in self.curvature.iter().zip(phi) {
                if p != 0.0 {
                    a.axpy(p, ak);
                }
            }
        }
        let b = (0..d).map(|i| dot(&self.linear[i * nf..(i + 1) * nf], phi)).collect();
        QuadricCoefficients { a, b, c: dot(&self.offset, phi) }
    }

    pub fn eval(&self, s: &[f64], a: &[f64]) -> f64 {
        self.coefficients(s).eval(a)
    }

    pub fn action_gradient(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        self.coefficients(s).gradient(a)
    }

    /// Exact action Hessian `2 A(s)`.
    pub fn action_hessian(&self, s: &[f64]) -> SymmetricMatrix {
        self.coefficients(s).a.scaled(2.0)
    }

    pub fn n_params(&self) -> usize {
        let d = self.action_dim;
        self.curvature.len() * d * d + self.linear.len() + self.offset.len()
    }

    /// Flat parameter vector: every `A_k` row-major, then `W_B`, then `w_c`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.n_params());
        for ak in &self.curvature {
            w.extend_from_slice(ak.as_slice());
        }
        w.extend_from_slice(&self.linear);
        w.extend_from_slice(&self.offset);
        w
    }

    pub fn from_flat(features: PolynomialFeatures, action_dim: usize, w: &[f64]) -> Result<Self> {
        let mut q = Self::zeros(features, action_dim);
        if w.len() != q.n_params() {
            return Err(invalid(format!("expected {} critic weights, got {}", q.n_params(), w.len())));
        }
        let dd = action_dim * action_dim;
        let nf = features.len();
        for k in 0..nf {
            q.curvature[k] = SymmetricMatrix::new(action_dim, w[k * dd..(k + 1) * dd].to_vec())?;
        }
        let off = nf * dd;
        q.linear.copy_from_slice(&w[off..off + action_dim * nf]);
        q.offset.copy_from_slice(&w[off + action_dim * nf..]);
        Ok(q)
    }

    /// `‖∇_w Q̂(s, a)‖²` in the Frobenius parameterization of each `A_k`.
    pub fn parameter_gradient_norm_sq(&self, s: &[f64], a: &[f64]) -> f64 {
        let phi_sq: f64 = self.features.eval(s).iter().map(|p| p * p).sum();
        let a_sq = dot(a, a);
        let curvature = if self.linear_only { 0.0 } else { a_sq * a_sq };
        phi_sq * (1.0 + a_sq + curvature)
    }

    /// `w ← w + step · ∇_w Q̂(s, a)`.
    pub fn apply_gradient_step(&mut self, s: &[f64], a: &[f64], step: f64) {
        let phi = self.features.eval(s);
        let nf = phi.len();
        if !self.linear_only {
            let aa = SymmetricMatrix::outer(a);
            for (ak, &p) in self.curvature.iter_mut().zip(&phi) {
                if p != 0.0 {
                    ak.axpy(step * p, &aa);
                }
            }
        }
        for (i, &ai) in a.iter().enumerate() {
            for (k, &p) in phi.iter().enumerate() {
                self.linear[i * nf + k] += step * ai * p;
            }
        }
        for (w, &p) in self.offset.iter_mut().zip(&phi) {
            *w += step * p;
        }
    }

    /// Semi-gradient step of `Q̂(s, a)` toward an arbitrary `target`; returns the TD error.
    pub fn td_update(&mut self, t: &Transition, target: f64, cfg: &CriticUpdateConfig) -> Result<f64> {
        let delta = target - self.eval(&t.state, &t.action);
        if !delta.is_finite() {
            return Err(Error::Numerical(format!("non-finite TD error at time {}", t.time_index)));
        }
        let mut step = cfg.learning_rate * delta;
        if cfg.normalized {
            step /= 1.0 + self.parameter_gradient_norm_sq(&t.state, &t.action);
        }
        self.apply_gradient_step(&t.state, &t.action, step);
        Ok(delta)
    }

    /// Sarsa target `r + γ Q̂(s', a')`; returns the TD error alongside the update.
    pub fn sarsa_step(
        &mut self,
        t: &Transition,
        a_next: &[f64],
        gamma: f64,
        cfg: &CriticUpdateConfig,
    ) -> Result<f64> {
        let target = t.reward + gamma * self.eval(&t.next_state, a_next);
        self.td_update(t, target, cfg)
    }

    /// Expected-sarsa target with the next-action marginal in closed form.
    pub fn expected_sarsa_step(
        &mut self,
        t: &Transition,
        mu_next: &[f64],
        sigma_next: &SymmetricMatrix,
        gamma: f64,
        cfg: &CriticUpdateConfig,
    ) -> Result<f64> {
        let target = t.reward + gamma * self.expected_value(&t.next_state, mu_next, sigma_next)?;
        self.td_update(t, target, cfg)
    }

    /// `∫ N(a; μ, Σ) Q̂(a, s) da`.
    pub fn expected_value(&self, s: &[f64], mu: &[f64], sigma: &SymmetricMatrix) -> Result<f64> {
        let c = self.coefficients(s);
        Ok(gaussian_quadric_expectation(&c.a, &c.b, mu, sigma)? + c.c)
    }
}

pub fn critic_eval(q: &QuadricCritic, s: &[f64], a: &[f64]) -> f64 {
    q.eval(s, a)
}

pub fn action_hessian(q: &QuadricCritic, s: &[f64]) -> SymmetricMatrix {
    q.action_hessian(s)
}

pub fn sarsa_update(
    q: &QuadricCritic,
    t: &Transition,
    a_next: &[f64],
    gamma: f64,
    cfg: &CriticUpdateConfig,
) -> Result<QuadricCritic> {
    let mut out = q.clone();
    out.sarsa_step(t, a_next, gamma, cfg)?;
    Ok(out)
}

/// Expected sarsa against the Gaussian policy at `s'`; `external_root` supplies
/// `Σ^{1/2}_{s'}` for Hessian-driven policies.
pub fn expected_sarsa_update(
    q: &QuadricCritic,
    t: &Transition,
    policy: &GaussianPolicy,
    external_root: Option<&SymmetricMatrix>,
    gamma: f64,
    cfg: &CriticUpdateConfig,
) -> Result<QuadricCritic> {
    let root = policy.covariance_root(external_root)?;
    let sigma = SymmetricMatrix::new(root.dim(), root.matmul(&root))?;
    let mu = policy.mean(&t.next_state);
    let mut out = q.clone();
    out.expected_sarsa_step(t, &mu, &sigma, gamma, cfg)?;
    Ok(out)
}

pub trait StateValue {
    fn value(&self, s: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> StateValue for F {
    fn value(&self, s: &[f64]) -> f64 {
        self(s)
    }
}

/// State-value approximator `V̂(s) = vᵀ φ(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueCritic {
    pub features: PolynomialFeatures,
    pub weights: Vec<f64>,
}

impl ValueCritic {
    pub fn new(features: PolynomialFeatures) -> Self {
        Self { features, weights: vec![0.0; features.len()] }
    }

    /// TD(0) update; returns the TD error used.
    pub fn td_step(&mut self, t: &Transition, gamma: f64, learning_rate: f64) -> Result<f64> {
        let delta = td_advantage(&*self, t, gamma);
        if !delta.is_finite() {
            return Err(Error::Numerical(format!("non-finite TD error at time {}", t.time_index)));
        }
        let phi = self.features.eval(&t.state);
        for (w, p) in self.weights.iter_mut().zip(&phi) {
            *w += learning_rate * delta * p;
        }
        Ok(delta)
    }
}

impl StateValue for ValueCritic {
    fn value(&self, s: &[f64]) -> f64 {
        dot(&self.weights, &self.features.eval(s))
    }
}

/// TD error `r + γ V̂(s') - V̂(s)`.
pub fn td_advantage<V: StateValue + ?Sized>(v_hat: &V, t: &Transition, gamma: f64) -> f64 {
    t.reward + gamma * v_hat.value(&t.next_state) - v_hat.value(&t.state)
}

pub const DEFAULT_FIT_RADIUS: f64 = 0.1;

/// Number of coefficients of a full quadric in `d` variables.
pub fn quadric_coefficient_count(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

pub fn default_fit_samples(d: usize) -> usize {
    4 * quadric_coefficient_count(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadricFit {
    pub hessian: SymmetricMatrix,
    /// Fitted `∇_a Q` at the centre.
    pub gradient: Vec<f64>,
    pub value: f64,
}

/// Least-squares quadric fit of `q(s, ·)` on points `μ + radius·u`, `u ~ N(0, I)`.
pub fn quadric_fit_hessian<F, R>(
    q: F,
    s: &[f64],
    mu: &[f64],
    radius: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<QuadricFit>
where
    F: Fn(&[f64], &[f64]) -> f64,
    R: Rng + ?Sized,
{
    let d = mu.len();
    let p = quadric_coefficient_count(d);
    if d == 0 {
        return Err(invalid("action dimension must be positive"));
    }
    if n_samples < p {
        return Err(invalid(format!("quadric fit in {d} dimensions needs at least {p} samples")));
    }
    if !(radius > 0.0) {
        return Err(invalid("fit radius must be positive"));
    }
    let mut points = Vec::with_capacity(n_samples);
    let mut values = Vec::with_capacity(n_samples);
    let mut a = vec![0.0; d];
    for _ in 0..n_samples {
        let u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for j in 0..d {
            a[j] = mu[j] + radius * u[j];
        }
        values.push(q(s, &a));
        points.push(u);
    }
    fit_scaled_quadric(&points, &values, radius)
}

/// Least squares in scaled coordinates `u = (a - μ) / radius`.
fn fit_scaled_quadric(points: &[Vec<f64>], values: &[f64], radius: f64) -> Result<QuadricFit> {
    let d = points[0].len();
    let p = quadric_coefficient_count(d);
    let n = points.len();
    let mut design = DMatrix::zeros(n, p);
    let y = DVector::from_column_slice(values);
    for (r, u) in points.iter().enumerate() {
        design[(r, 0)] = 1.0;
        let mut col = 1;
        for &uj in u {
            design[(r, col)] = uj;
            col += 1;
        }
        for j in 0..d {
            for k in j..d {
                design[(r, col)] = u[j] * u[k];
                col += 1;
            }
        }
    }
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = smax / smin;
    if !(smin > 1e-10 * smax) {
        return Err(Error::IllConditionedFit { condition });
    }
    let coef = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))?;
    let gradient = (0..d).map(|j| coef[1 + j] / radius).collect();
    let mut hessian = SymmetricMatrix::zeros(d);
    let mut col = 1 + d;
    let r2 = radius * radius;
    for j in 0..d {
        for k in j..d {
            let h = if j == k { 2.0 * coef[col] } else { coef[col] };
            hessian.set_sym(j, k, h / r2);
            col += 1;
        }
    }
    Ok(QuadricFit { hessian, gradient, value: coef[0] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn transition(s: Vec<f64>, a: Vec<f64>, r: f64, s2: Vec<f64>) -> Transition {
        Transition { state: s, action: a, reward: r, next_state: s2, time_index: 0 }
    }

    fn random_critic(rng: &mut ChaCha8Rng, state_dim: usize, d: usize) -> QuadricCritic {
        let f = PolynomialFeatures::new(state_dim);
        let w: Vec<f64> = (0..QuadricCritic::zeros(f, d).n_params())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        QuadricCritic::from_flat(f, d, &w).unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = PolynomialFeatures::new(1);
        let mut q = QuadricCritic::zeros(f, 2);
        q.offset[0] = 3.5;
        assert_eq!(q.eval(&[0.4], &[0.0, 0.0]), 3.5);

        let mut q = QuadricCritic::zeros(f, 2);
        q.curvature[0] = SymmetricMatrix::scaled_identity(2, -0.5);
        assert_eq!(q.eval(&[0.4], &[1.0, 1.0]), -1.0);
        assert_eq!(q.action_hessian(&[0.4]), SymmetricMatrix::scaled_identity(2, -1.0));

        // Q = ½ + ½a
        let mut q = QuadricCritic::zeros(f, 1);
        q.linear[0] = 0.5;
        q.offset[0] = 0.5;
        for a in [-1.0, 0.0, 2.0] {
            assert_eq!(q.eval(&[0.0], &[a]), 0.5 + 0.5 * a);
        }
        assert_eq!(q.action_hessian(&[0.0]), SymmetricMatrix::zeros(1));
    }

    #[test]
    fn initialization_curvature() {
        let q = QuadricCritic::new(PolynomialFeatures::new(2), 2);
        assert_eq!(q.coefficients(&[0.0, 0.0]).a, SymmetricMatrix::scaled_identity(2, -0.1));
    }

    #[test]
    fn flat_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_critic(&mut rng, 2, 2);
        let back = QuadricCritic::from_flat(q.features, 2, &q.to_flat()).unwrap();
        assert_eq!(q, back);
    }

    #[test]
    fn sarsa_fixed_points() {
        let f = PolynomialFeatures::new(1);
        let mut q = QuadricCritic::zeros(f, 1);
        q.offset[0] = 2.0;
        // r + γ Q(s', a') - Q(s, a) = 1 + 0.5·2 - 2 = 0
        let t = transition(vec![0.0], vec![0.0], 1.0, vec![0.0]);
        let cfg = CriticUpdateConfig { learning_rate: 0.3, mode: CriticMode::Sarsa, ..Default::default() };
        assert_eq!(sarsa_update(&q, &t, &[0.0], 0.5, &cfg).unwrap(), q);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_critic(&mut rng, 1, 1);
        let t = transition(vec![0.3], vec![0.2], 5.0, vec![-0.4]);
        let cfg0 = CriticUpdateConfig { learning_rate: 0.0, ..cfg.clone() };
        assert_eq!(sarsa_update(&q, &t, &[0.7], 0.9, &cfg0).unwrap(), q);
    }

    #[test]
    fn sarsa_single_state_converges_to_geometric_value() {
        let f = PolynomialFeatures::new(1);
        let mut q = QuadricCritic::new(f, 1);
        let cfg = CriticUpdateConfig { learning_rate: 0.1, mode: CriticMode::Sarsa, ..Default::default() };
        let gamma = 0.9;
        let t = transition(vec![0.0], vec![0.0], 1.0, vec![0.0]);
        for _ in 0..10_000 {
            q.sarsa_step(&t, &[0.0], gamma, &cfg).unwrap();
        }
        assert!((q.eval(&[0.0], &[0.0]) - 1.0 / (1.0 - gamma)).abs() < 1e-3);
    }

    #[test]
    fn normalized_step_shrinks_error_by_one_plus_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut q = random_critic(&mut rng, 2, 2);
        let t = transition(vec![0.5, -1.5], vec![1.2, -0.7], 3.0, vec![0.1, 0.2]);
        let cfg = CriticUpdateConfig { learning_rate: 1.0, normalized: true, ..Default::default() };
        let n = q.parameter_gradient_norm_sq(&t.state, &t.action);
        let target = t.reward + 0.9 * q.eval(&t.next_state, &[0.0, 0.0]);
        let before = q.sarsa_step(&t, &[0.0, 0.0], 0.9, &cfg).unwrap();
        let after = target - q.eval(&t.state, &t.action);
        assert!((after - before / (1.0 + n)).abs() < 1e-9 * before.abs());
    }

    #[test]
    fn non_finite_td_error_is_numerical() {
        let mut q = QuadricCritic::zeros(PolynomialFeatures::new(1), 1);
        let t = transition(vec![0.0], vec![0.0], f64::INFINITY, vec![0.0]);
        let err = q.sarsa_step(&t, &[0.0], 0.9, &CriticUpdateConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn expected_sarsa_linear_critic_target() {
        let f = PolynomialFeatures::new(1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut q = random_critic(&mut rng, 1, 2);
        q.linear_only = true;
        let t = transition(vec![0.3], vec![0.1, -0.2], 0.7, vec![0.5]);
        let mu = [0.25, -0.5];
        let sigma = SymmetricMatrix::from_rows(&[&[0.4, 0.1], &[0.1, 0.3]]).unwrap();
        let c = q.coefficients(&[0.5]);
        let expected_target = 0.7 + 0.9 * (dot(&c.b, &mu) + c.c);
        let mut q2 = q.clone();
        q2.expected_sarsa_step(&t, &mu, &sigma, 0.9, &CriticUpdateConfig::default()).unwrap();
        let mut q3 = q.clone();
        let delta = expected_target - q.eval(&t.state, &t.action);
        q3.apply_gradient_step(&t.state, &t.action, 0.01 * delta);
        assert_eq!(q2.features, f);
        for (x, y) in q2.to_flat().iter().zip(q3.to_flat()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn expected_sarsa_degenerate_policy_matches_sarsa_at_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = random_critic(&mut rng, 2, 2);
        let t = transition(vec![0.3, 0.1], vec![0.1, -0.2], 0.7, vec![0.5, -0.6]);
        let mu = [0.25, -0.5];
        let cfg = CriticUpdateConfig::default();
        let mut a = q.clone();
        a.expected_sarsa_step(&t, &mu, &SymmetricMatrix::zeros(2), 0.9, &cfg).unwrap();
        let b = sarsa_update(&q, &t, &mu, 0.9, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn updates_keep_curvature_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut q = random_critic(&mut rng, 2, 3);
        let cfg = CriticUpdateConfig::default();
        for _ in 0..200 {
            let s: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t = transition(s.clone(), a, rng.random_range(-1.0..1.0), s);
            q.sarsa_step(&t, &[0.1, 0.2, 0.3], 0.9, &cfg).unwrap();
        }
        for ak in &q.curvature {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(ak.get(i, j), ak.get(j, i));
                }
            }
        }
    }

    #[test]
    fn td_advantage_examples() {
        let t = transition(vec![0.2], vec![0.0], 1.0, vec![0.4]);
        let zero = |_: &[f64]| 0.0;
        assert_eq!(td_advantage(&zero, &t, 0.9), 1.0);
        let two = |_: &[f64]| 2.0;
        assert_eq!(td_advantage(&two, &t, 0.5), 0.0);
        let mut v = ValueCritic::new(PolynomialFeatures::new(1));
        v.weights[1] = 1.0;
        assert!((td_advantage(&v, &t, 0.5) - (1.0 + 0.2 - 0.2)).abs() < 1e-15);
    }

    #[test]
    fn quadric_fit_recovers_quadric() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for d in 1..=3 {
            let q = random_critic(&mut rng, 2, d);
            let s = [0.3, -0.7];
            let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fit = quadric_fit_hessian(
                |s: &[f64], a: &[f64]| q.eval(s, a),
                &s,
                &mu,
                DEFAULT_FIT_RADIUS,
                default_fit_samples(d),
                &mut rng,
            )
            .unwrap();
            let h = q.action_hessian(&s);
            assert!(fit.hessian.sub(&h).unwrap().frobenius_norm() < 1e-8, "d={d}");
            let g = q.action_gradient(&s, &mu);
            for (x, y) in fit.gradient.iter().zip(&g) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn quadric_fit_linear_has_no_curvature() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = |_: &[f64], a: &[f64]| 1.5 - 2.0 * a[0] + 0.7 * a[1];
        let fit = quadric_fit_hessian(f, &[0.0], &[0.3, 0.4], 0.1, 24, &mut rng).unwrap();
        assert!(fit.hessian.frobenius_norm() <= 1e-8);
        assert!((fit.gradient[0] + 2.0).abs() < 1e-8 && (fit.gradient[1] - 0.7).abs() < 1e-8);
    }

    #[test]
    fn quadric_fit_quartic_bias_is_order_radius_squared() {
        // a⁴ on N(0, r²) projects onto 6 r² a² + const, i.e. Hessian bias 12 r².
        let f = |_: &[f64], a: &[f64]| a[0].powi(4);
        let r = 0.1;
        let mut hs = Vec::new();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            hs.push(quadric_fit_hessian(f, &[0.0], &[0.0], r, default_fit_samples(1), &mut rng).unwrap().hessian.get(0, 0));
        }
        let mean = hs.iter().sum::<f64>() / hs.len() as f64;
        assert!(hs.iter().all(|h| h.abs() <= 2.0 * 12.0 * r * r), "{hs:?}");
        assert!((mean - 12.0 * r * r).abs() < 0.5 * 12.0 * r * r, "mean {mean}");
    }

    #[test]
    fn quadric_fit_rejects_too_few_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = |_: &[f64], a: &[f64]| a[0];
        assert!(matches!(
            quadric_fit_hessian(f, &[0.0], &[0.0, 0.0], 0.1, 5, &mut rng),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn quadric_fit_detects_rank_deficiency() {
        // every sample on the same point
        let points = vec![vec![0.3, -0.2]; 12];
        let err = fit_scaled_quadric(&points, &[1.0; 12], 0.1).unwrap_err();
        assert!(matches!(err, Error::IllConditionedFit { .. }));
        // collinear samples leave the cross term unidentified
        let points: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 * 0.1, i as f64 * 0.2]).collect();
        assert!(fit_scaled_quadric(&points, &[0.0; 12], 0.1).is_err());
    }
}
