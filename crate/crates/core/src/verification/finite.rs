//! Exact tabular oracles: return gradients, the policy-gradient identity,
//! occupancy identities, and second-moment variance comparison.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::mdp::{discounted_occupancy, finite_mdp_value, solve_discounted, state_marginals, FiniteMdp};

use super::{CheckStatus, VerificationReport};

/// Central finite-difference step for exact-solve derivatives.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxTabularPolicy {
    /// `logits[s][a]`.
    pub logits: Vec<Vec<f64>>,
}

impl SoftmaxTabularPolicy {
    pub fn new(logits: Vec<Vec<f64>>) -> Result<Self> {
        if logits.is_empty() || logits[0].is_empty() || logits.iter().any(|r| r.len() != logits[0].len()) {
            return Err(invalid("logit table must be a non-empty rectangle"));
        }
        if logits.iter().flatten().any(|x| !x.is_finite()) {
            return Err(invalid("logits must be finite"));
        }
        Ok(Self { logits })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize, scale: f64) -> Self {
        let logits = (0..n_states)
            .map(|_| (0..n_actions).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        Self { logits }
    }

    pub fn n_states(&self) -> usize {
        self.logits.len()
    }

    pub fn n_actions(&self) -> usize {
        self.logits[0].len()
    }

    pub fn n_params(&self) -> usize {
        self.n_states() * self.n_actions()
    }

    pub fn probs(&self) -> Vec<Vec<f64>> {
        self.logits
            .iter()
            .map(|row| {
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
                let z: f64 = e.iter().sum();
                e.into_iter().map(|x| x / z).collect()
            })
            .collect()
    }

    /// Flat index of `logits[s][a]`.
    pub fn index(&self, s: usize, a: usize) -> usize {
        s * self.n_actions() + a
    }

    pub fn perturbed(&self, k: usize, delta: f64) -> Self {
        let mut p = self.clone();
        let na = self.n_actions();
        p.logits[k / na][k % na] += delta;
        p
    }

    /// Dense `∇_θ log π(a|s)`: `1[b = a] - π(b|s)` on row `s`.
    pub fn score(&self, probs: &[Vec<f64>], s: usize, a: usize) -> Vec<f64> {
        let mut g = vec![0.0; self.n_params()];
        for b in 0..self.n_actions() {
            g[self.index(s, b)] = f64::from(u8::from(a == b)) - probs[s][b];
        }
        g
    }
}

/// Random instance; transition rows and `p0` are normalized uniform draws.
/// With `action_dependent = false` every action shares the same next-state row.
pub fn random_mdp<R: Rng + ?Sized>(
    rng: &mut R,
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    action_dependent: bool,
) -> Result<FiniteMdp> {
    let draw_row = |rng: &mut R| -> Vec<f64> {
        let w: Vec<f64> = (0..n_states).map(|_| rng.random_range(0.05..1.0)).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    };
    let mut transition = Vec::with_capacity(n_states);
    for _ in 0..n_states {
        let shared = draw_row(rng);
        let rows = (0..n_actions)
            .map(|_| if action_dependent { draw_row(rng) } else { shared.clone() })
            .collect();
        transition.push(rows);
    }
    let reward = (0..n_states)
        .map(|_| (0..n_actions).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let p0 = draw_row(rng);
    FiniteMdp::new(transition, reward, p0, gamma)
}

/// `∇_θ J` by central differences, two exact solves per coordinate.
pub fn exact_return_gradient(m: &FiniteMdp, p: &SoftmaxTabularPolicy) -> Result<Vec<Vec<f64>>> {
    check_shapes(m, p)?;
    let mut g = vec![vec![0.0; p.n_actions()]; p.n_states()];
    for k in 0..p.n_params() {
        let jp = m.expected_return(&p.perturbed(k, FD_STEP).probs())?;
        let jm = m.expected_return(&p.perturbed(k, -FD_STEP).probs())?;
        g[k / p.n_actions()][k % p.n_actions()] = (jp - jm) / (2.0 * FD_STEP);
    }
    Ok(g)
}

fn check_shapes(m: &FiniteMdp, p: &SoftmaxTabularPolicy) -> Result<()> {
    if p.n_states() != m.n_states || p.n_actions() != m.n_actions {
        return Err(invalid("policy table does not match the MDP"));
    }
    Ok(())
}

/// The two right-hand sides of the policy-gradient identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradientAssemblies {
    /// Finite-difference `∇J`.
    pub direct: Vec<f64>,
    /// `Σ_s ρ(s) [∇V(s) - Σ_a π(a|s) ∇Q(a, s)]`.
    pub occupancy_form: Vec<f64>,
    /// `Σ_s ρ(s) Σ_a π(a|s) ∇log π(a|s) Q(a, s)` with the analytic softmax score.
    pub score_form: Vec<f64>,
}

pub fn policy_gradient_assemblies(m: &FiniteMdp, p: &SoftmaxTabularPolicy) -> Result<PolicyGradientAssemblies> {
    check_shapes(m, p)?;
    let probs = p.probs();
    let rho = discounted_occupancy(m, &probs)?;
    let v = finite_mdp_value(m, &probs)?;
    let q = m.q_values(&v);
    let n = p.n_params();
    let direct: Vec<f64> = exact_return_gradient(m, p)?.into_iter().flatten().collect();

    let mut occupancy_form = vec![0.0; n];
    for (k, out) in occupancy_form.iter_mut().enumerate() {
        let vp = finite_mdp_value(m, &p.perturbed(k, FD_STEP).probs())?;
        let vm = finite_mdp_value(m, &p.perturbed(k, -FD_STEP).probs())?;
        let qp = m.q_values(&vp);
        let qm = m.q_values(&vm);
        let h2 = 2.0 * FD_STEP;
        *out = (0..m.n_states)
            .map(|s| {
                let dv = (vp[s] - vm[s]) / h2;
                let dq: f64 = (0..m.n_actions).map(|a| probs[s][a] * (qp[s][a] - qm[s][a]) / h2).sum();
                rho[s] * (dv - dq)
            })
            .sum();
    }

    let mut score_form = vec![0.0; n];
    for s in 0..m.n_states {
        for a in 0..m.n_actions {
            let w = rho[s] * probs[s][a] * q[s][a];
            for (o, x) in score_form.iter_mut().zip(p.score(&probs, s, a)) {
                *o += w * x;
            }
        }
    }
    Ok(PolicyGradientAssemblies { direct, occupancy_form, score_form })
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Both assemblies against the finite-difference gradient, max-abs error.
pub fn theorem1_check(m: &FiniteMdp, p: &SoftmaxTabularPolicy, tolerance: f64) -> Result<VerificationReport> {
    VerificationReport::timed("policy_gradient_identity_finite", tolerance, || {
        let asm = policy_gradient_assemblies(m, p)?;
        let e1 = max_abs_diff(&asm.direct, &asm.occupancy_form);
        let e2 = max_abs_diff(&asm.direct, &asm.score_form);
        let err = e1.max(e2);
        Ok((err, CheckStatus::from_bool(err <= tolerance), format!("occupancy form {e1:.3e}, score form {e2:.3e}")))
    })
}

fn trunc_horizon(gamma: f64, tail: f64) -> usize {
    if gamma == 0.0 {
        0
    } else {
        (tail.ln() / gamma.ln()).ceil() as usize
    }
}

/// `|Σ_s ρ(s) f(s) - Σ_{t≤T} γᵗ E[f(s_t)]|` with `γ^T < 1e-12`.
pub fn discounted_ergodic_error(m: &FiniteMdp, policy: &[Vec<f64>], f: &[f64]) -> Result<f64> {
    let rho = discounted_occupancy(m, policy)?;
    let lhs: f64 = rho.iter().zip(f).map(|(r, x)| r * x).sum();
    let steps = trunc_horizon(m.gamma, 1e-12);
    let marg = state_marginals(m, policy, steps)?;
    let rhs: f64 = marg
        .iter()
        .enumerate()
        .map(|(t, p)| m.gamma.powi(t as i32) * p.iter().zip(f).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    Ok((lhs - rhs).abs())
}

/// `|γ Σ_s ρ(s) Σ_{s'} P_π(s'|s) f(s') - (Σ_s ρ(s) f(s) - Σ_s p0(s) f(s))|`.
pub fn eigenfunction_error(m: &FiniteMdp, policy: &[Vec<f64>], f: &[f64]) -> Result<f64> {
    let rho = discounted_occupancy(m, policy)?;
    let p = m.policy_transition(policy);
    let n = m.n_states;
    let lhs: f64 = (0..n)
        .map(|s| rho[s] * (0..n).map(|s2| p[(s, s2)] * f[s2]).sum::<f64>())
        .sum::<f64>()
        * m.gamma;
    let rf: f64 = rho.iter().zip(f).map(|(a, b)| a * b).sum();
    let pf: f64 = m.p0.iter().zip(f).map(|(a, b)| a * b).sum();
    Ok((lhs - (rf - pf)).abs())
}

/// Exact second moments of the sampled-action (`S₁`) and integrated (`S₂`)
/// gradient estimators, `E[|Σ_t γᵗ x_t|²]` per start state.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMoments {
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    /// Shared first moment `E[Σ_t γᵗ x_t]` per start state.
    pub mean: Vec<Vec<f64>>,
    /// Per-state `E_a |x₁ - x₂|²`.
    pub action_variance: Vec<f64>,
}

impl SecondMoments {
    /// Trace of the covariance of each estimator under `p0`.
    pub fn variances(&self, p0: &[f64]) -> (f64, f64) {
        let n = self.mean[0].len();
        let mean: Vec<f64> = (0..n).map(|k| p0.iter().zip(&self.mean).map(|(p, m)| p * m[k]).sum()).collect();
        let sq: f64 = mean.iter().map(|x| x * x).sum();
        let e1: f64 = p0.iter().zip(&self.s1).map(|(p, s)| p * s).sum();
        let e2: f64 = p0.iter().zip(&self.s2).map(|(p, s)| p * s).sum();
        (e1 - sq, e2 - sq)
    }
}

fn estimator_terms(
    m: &FiniteMdp,
    p: &SoftmaxTabularPolicy,
    probs: &[Vec<f64>],
    critic: &[Vec<f64>],
    baseline: &[f64],
) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
    let n = p.n_params();
    let mut x1 = vec![vec![Vec::new(); m.n_actions]; m.n_states];
    let mut x2 = vec![vec![0.0; n]; m.n_states];
    for s in 0..m.n_states {
        for a in 0..m.n_actions {
            let w = critic[s][a] + baseline[s];
            let x: Vec<f64> = p.score(probs, s, a).into_iter().map(|g| g * w).collect();
            for (o, v) in x2[s].iter_mut().zip(&x) {
                *o += probs[s][a] * v;
            }
            x1[s][a] = x;
        }
    }
    (x1, x2)
}

/// Solves both second-moment Bellman equations (discount `γ²`) exactly.
pub fn second_moments(
    m: &FiniteMdp,
    p: &SoftmaxTabularPolicy,
    critic: &[Vec<f64>],
    baseline: &[f64],
) -> Result<SecondMoments> {
    check_shapes(m, p)?;
    if critic.len() != m.n_states || baseline.len() != m.n_states || critic.iter().any(|r| r.len() != m.n_actions) {
        return Err(invalid("critic and baseline tables must match the MDP"));
    }
    let probs = p.probs();
    let (x1, x2) = estimator_terms(m, p, &probs, critic, baseline);
    let ns = m.n_states;
    let n = p.n_params();
    let pp = m.policy_transition(&probs);
    let g = m.gamma;
    // first moment, one column per parameter
    let rhs = DMatrix::from_fn(ns, n, |s, k| x2[s][k]);
    let lhs = DMatrix::identity(ns, ns) - &pp * g;
    let mean_m = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| crate::Error::Numerical("singular first-moment system".into()))?;
    let mut u1 = DVector::zeros(ns);
    let mut u2 = DVector::zeros(ns);
    let mut action_variance = vec![0.0; ns];
    for s in 0..ns {
        for a in 0..m.n_actions {
            let pm: Vec<f64> = (0..n)
                .map(|k| (0..ns).map(|s2| m.transition[s][a][s2] * mean_m[(s2, k)]).sum())
                .collect();
            let d1: f64 = x1[s][a].iter().map(|x| x * x).sum::<f64>()
                + 2.0 * g * x1[s][a].iter().zip(&pm).map(|(x, y)| x * y).sum::<f64>();
            let d2: f64 = x2[s].iter().map(|x| x * x).sum::<f64>()
                + 2.0 * g * x2[s].iter().zip(&pm).map(|(x, y)| x * y).sum::<f64>();
            u1[s] += probs[s][a] * d1;
            u2[s] += probs[s][a] * d2;
            action_variance[s] +=
                probs[s][a] * x1[s][a].iter().zip(&x2[s]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        }
    }
    let s1 = solve_discounted(&pp, g * g, &u1)?;
    let s2 = solve_discounted(&pp, g * g, &u2)?;
    Ok(SecondMoments {
        s1: s1.iter().copied().collect(),
        s2: s2.iter().copied().collect(),
        mean: (0..ns).map(|s| (0..n).map(|k| mean_m[(s, k)]).collect()).collect(),
        action_variance,
    })
}

/// Strict `S₁(s) > S₂(s)` for all states; skipped when some state has zero
/// action variance of the sampled estimator.
pub fn variance_comparison_exact(
    m: &FiniteMdp,
    p: &SoftmaxTabularPolicy,
    critic: &[Vec<f64>],
    baseline: &[f64],
) -> Result<(VerificationReport, SecondMoments)> {
    let mut moments = None;
    let report = VerificationReport::timed("second_moment_dominance", 0.0, || {
        let sm = second_moments(m, p, critic, baseline)?;
        let min_var = sm.action_variance.iter().cloned().fold(f64::INFINITY, f64::min);
        let min_gap = sm.s1.iter().zip(&sm.s2).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
        let out = if !(min_var > 1e-12) {
            (0.0, CheckStatus::Skipped, format!("zero action variance (min {min_var:.3e})"))
        } else {
            (
                (-min_gap).max(0.0),
                CheckStatus::from_bool(min_gap > 0.0),
                format!("min S1-S2 {min_gap:.4e}, min action variance {min_var:.4e}"),
            )
        };
        moments = Some(sm);
        Ok(out)
    })?;
    Ok((report, moments.expect("set on success")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutVariance {
    pub var1: f64,
    pub var2: f64,
    /// Standard errors of the two variance estimates.
    pub se1: f64,
    pub se2: f64,
    pub rollouts: usize,
}

fn sample_index<R: Rng + ?Sized>(rng: &mut R, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

fn trace_variance(samples: &[Vec<f64>]) -> (f64, f64) {
    let n = samples.len() as f64;
    let d = samples[0].len();
    let mean: Vec<f64> = (0..d).map(|k| samples.iter().map(|g| g[k]).sum::<f64>() / n).collect();
    let dev: Vec<f64> = samples
        .iter()
        .map(|g| g.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>())
        .collect();
    let var = dev.iter().sum::<f64>() / (n - 1.0);
    let sd = (dev.iter().map(|x| (x - var) * (x - var)).sum::<f64>() / (n - 1.0)).sqrt();
    (var, sd / n.sqrt())
}

/// Monte Carlo variances of both estimators over truncated trajectories
/// (`γ^T < 1e-8`), with common random numbers.
pub fn rollout_variances<R: Rng + ?Sized>(
    m: &FiniteMdp,
    p: &SoftmaxTabularPolicy,
    critic: &[Vec<f64>],
    baseline: &[f64],
    rollouts: usize,
    rng: &mut R,
) -> Result<RolloutVariance> {
    check_shapes(m, p)?;
    if rollouts < 2 {
        return Err(invalid("need at least two rollouts"));
    }
    let probs = p.probs();
    let (x1, x2) = estimator_terms(m, p, &probs, critic, baseline);
    let horizon = trunc_horizon(m.gamma, 1e-8).max(1);
    let n = p.n_params();
    let mut g1s = Vec::with_capacity(rollouts);
    let mut g2s = Vec::with_capacity(rollouts);
    for _ in 0..rollouts {
        let mut s = sample_index(rng, &m.p0);
        let mut g1 = vec![0.0; n];
        let mut g2 = vec![0.0; n];
        let mut w = 1.0;
        for _ in 0..horizon {
            let a = sample_index(rng, &probs[s]);
            for k in 0..n {
                g1[k] += w * x1[s][a][k];
                g2[k] += w * x2[s][k];
            }
            s = sample_index(rng, &m.transition[s][a]);
            w *= m.gamma;
        }
        g1s.push(g1);
        g2s.push(g2);
    }
    let (var1, se1) = trace_variance(&g1s);
    let (var2, se2) = trace_variance(&g2s);
    Ok(RolloutVariance { var1, var2, se1, se2, rollouts })
}

/// Tabular-state problem with a 1-D Gaussian policy `N(θ_s, σ²)` and
/// per-state quadric critic `A_s a² + B_s a + c_s`; transitions ignore the action.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSurrogate {
    /// `P[s][s']`.
    pub transition: Vec<Vec<f64>>,
    pub p0: Vec<f64>,
    pub gamma: f64,
    pub mean: Vec<f64>,
    pub std: f64,
    /// `(A_s, B_s, c_s)`.
    pub critic: Vec<(f64, f64, f64)>,
}

impl GaussianSurrogate {
    pub fn from_mdp<R: Rng + ?Sized>(m: &FiniteMdp, std: f64, rng: &mut R) -> Self {
        let critic = (0..m.n_states)
            .map(|_| (rng.random_range(-1.0..-0.1), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        Self {
            transition: m.transition.iter().map(|rows| rows[0].clone()).collect(),
            p0: m.p0.clone(),
            gamma: m.gamma,
            mean: (0..m.n_states).map(|_| rng.random_range(-1.0..1.0)).collect(),
            std,
            critic,
        }
    }

    /// `E_a Q̂(s, a)`.
    pub fn expected_critic(&self, s: usize) -> f64 {
        let (a, b, c) = self.critic[s];
        let mu = self.mean[s];
        a * (self.std * self.std + mu * mu) + b * mu + c
    }
}

/// Rollout variances of the sampled-action and integrated estimators on the
/// Gaussian surrogate; `value_baseline` uses `b(s) = -E_a Q̂(s, a)`.
pub fn gaussian_surrogate_variances<R: Rng + ?Sized>(
    g: &GaussianSurrogate,
    value_baseline: bool,
    rollouts: usize,
    rng: &mut R,
) -> Result<RolloutVariance> {
    if rollouts < 2 || !(g.std > 0.0) {
        return Err(invalid("need at least two rollouts and a positive std"));
    }
    let ns = g.mean.len();
    let horizon = trunc_horizon(g.gamma, 1e-8).max(1);
    let var = g.std * g.std;
    let mut g1s = Vec::with_capacity(rollouts);
    let mut g2s = Vec::with_capacity(rollouts);
    for _ in 0..rollouts {
        let mut s = sample_index(rng, &g.p0);
        let mut g1 = vec![0.0; ns];
        let mut g2 = vec![0.0; ns];
        let mut w = 1.0;
        for _ in 0..horizon {
            let (qa, qb, qc) = g.critic[s];
            let mu = g.mean[s];
            let z: f64 = rng.sample(StandardNormal);
            let a = mu + g.std * z;
            let b = if value_baseline { -g.expected_critic(s) } else { 0.0 };
            g1[s] += w * (a - mu) / var * (qa * a * a + qb * a + qc + b);
            g2[s] += w * (2.0 * qa * mu + qb);
            s = sample_index(rng, &g.transition[s]);
            w *= g.gamma;
        }
        g1s.push(g1);
        g2s.push(g2);
    }
    let (var1, se1) = trace_variance(&g1s);
    let (var2, se2) = trace_variance(&g2s);
    Ok(RolloutVariance { var1, var2, se1, se2, rollouts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bandit_gradient_matches_softmax_formula() {
        let m = FiniteMdp::new(vec![vec![vec![1.0]; 3]], vec![vec![1.0, -0.5, 0.25]], vec![1.0], 0.0).unwrap();
        let p = SoftmaxTabularPolicy::new(vec![vec![0.3, -0.2, 0.1]]).unwrap();
        let g = exact_return_gradient(&m, &p).unwrap();
        let pi = &p.probs()[0];
        let r = &m.reward[0];
        let mean: f64 = pi.iter().zip(r).map(|(a, b)| a * b).sum();
        for a in 0..3 {
            assert!((g[0][a] - pi[a] * (r[a] - mean)).abs() < 1e-9);
        }
        assert!(theorem1_check(&m, &p, 1e-4).unwrap().passed());
    }

    #[test]
    fn unreachable_state_has_zero_gradient() {
        // state 1 is never entered from state 0
        let m = FiniteMdp::new(
            vec![vec![vec![1.0, 0.0], vec![1.0, 0.0]], vec![vec![0.0, 1.0], vec![1.0, 0.0]]],
            vec![vec![1.0, 0.0], vec![3.0, -2.0]],
            vec![1.0, 0.0],
            0.9,
        )
        .unwrap();
        let p = SoftmaxTabularPolicy::new(vec![vec![0.0, 0.5], vec![0.2, -0.1]]).unwrap();
        let g = exact_return_gradient(&m, &p).unwrap();
        assert!(g[1].iter().all(|x| x.abs() < 1e-9), "{g:?}");
    }

    #[test]
    fn near_deterministic_optimal_policy_has_small_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_mdp(&mut rng, 3, 2, 0.5, true).unwrap();
        // greedy w.r.t. the optimal Q obtained by value iteration
        let mut v = vec![0.0; 3];
        for _ in 0..2000 {
            v = m.q_values(&v).iter().map(|r| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
        }
        let q = m.q_values(&v);
        let logits = q
            .iter()
            .map(|r| r.iter().map(|&x| if x == r.iter().cloned().fold(f64::NEG_INFINITY, f64::max) { 20.0 } else { 0.0 }).collect())
            .collect();
        let p = SoftmaxTabularPolicy::new(logits).unwrap();
        let g = exact_return_gradient(&m, &p).unwrap();
        assert!(g.iter().flatten().all(|x| x.abs() < 1e-6), "{g:?}");
    }

    #[test]
    fn policy_gradient_identity_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = random_mdp(&mut rng, 4, 3, 0.8, true).unwrap();
        let p = SoftmaxTabularPolicy::random(&mut rng, 4, 3, 1.0);
        let r = theorem1_check(&m, &p, 1e-4).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.error < 1e-7);
    }

    #[test]
    fn occupancy_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for gamma in [0.0, 0.5, 0.9] {
            let m = random_mdp(&mut rng, 5, 3, gamma, true).unwrap();
            let pi = SoftmaxTabularPolicy::random(&mut rng, 5, 3, 1.0).probs();
            let f: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(discounted_ergodic_error(&m, &pi, &f).unwrap() < 1e-9);
            assert!(eigenfunction_error(&m, &pi, &f).unwrap() < 1e-9);
        }
    }

    #[test]
    fn constant_critic_without_baseline_is_skipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_mdp(&mut rng, 3, 2, 0.7, false).unwrap();
        let p = SoftmaxTabularPolicy::random(&mut rng, 3, 2, 1.0);
        let critic = vec![vec![0.0; 2]; 3];
        let (r, sm) = variance_comparison_exact(&m, &p, &critic, &[0.0; 3]).unwrap();
        assert_eq!(r.status, CheckStatus::Skipped);
        for (a, b) in sm.s1.iter().zip(&sm.s2) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn second_moment_dominance_and_rollout_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let m = random_mdp(&mut rng, 3, 2, 0.7, false).unwrap();
        let p = SoftmaxTabularPolicy::random(&mut rng, 3, 2, 1.0);
        let critic: Vec<Vec<f64>> = m.q_values(&finite_mdp_value(&m, &p.probs()).unwrap());
        let (r, sm) = variance_comparison_exact(&m, &p, &critic, &[0.0; 3]).unwrap();
        assert!(r.passed(), "{r:?}");
        let (v1, v2) = sm.variances(&m.p0);
        let ro = rollout_variances(&m, &p, &critic, &[0.0; 3], 10_000, &mut rng).unwrap();
        assert!((ro.var1 - v1).abs() < 4.0 * ro.se1, "{ro:?} vs {v1}");
        assert!((ro.var2 - v2).abs() < 4.0 * ro.se2.max(1e-12), "{ro:?} vs {v2}");
        assert!(ro.var1 > ro.var2);
    }
}
