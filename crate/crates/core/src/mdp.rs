//! MDP descriptions, trajectories and exact tabular MDP solvers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub name: String,
    pub state_dim: usize,
    pub action_dim: usize,
    pub gamma: f64,
    /// Episode truncation length.
    pub horizon: usize,
}

impl EnvironmentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 || self.action_dim == 0 {
            return Err(invalid("state and action dimensions must be positive"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(invalid(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub time_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub gamma: f64,
    transitions: Vec<Transition>,
}

impl Trajectory {
    pub fn new(gamma: f64) -> Self {
        Self { gamma, transitions: Vec::new() }
    }

    /// Appends a transition; its `time_index` must continue the sequence.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.time_index != self.transitions.len() {
            return Err(invalid(format!(
                "expected time index {}, got {}",
                self.transitions.len(),
                t.time_index
            )));
        }
        self.transitions.push(t);
        Ok(())
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    pub fn discounted_return(&self) -> f64 {
        self.transitions
            .iter()
            .map(|t| self.gamma.powi(t.time_index as i32) * t.reward)
            .sum()
    }
}

/// Exact tabular MDP used by the oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transition[s][a][s']`.
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `reward[s][a]`.
    pub reward: Vec<Vec<f64>>,
    pub p0: Vec<f64>,
    pub gamma: f64,
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(invalid(format!("{what} has negative or non-finite entries")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(invalid(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl FiniteMdp {
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
        p0: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        let n_states = transition.len();
        if n_states == 0 {
            return Err(invalid("MDP needs at least one state"));
        }
        let n_actions = transition[0].len();
        if n_actions == 0 {
            return Err(invalid("MDP needs at least one action"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(invalid(format!("gamma must lie in [0, 1), got {gamma}")));
        }
        if reward.len() != n_states || p0.len() != n_states {
            return Err(invalid("reward table and p0 must have one entry per state"));
        }
        for (s, rows) in transition.iter().enumerate() {
            if rows.len() != n_actions || reward[s].len() != n_actions {
                return Err(invalid(format!("state {s} has the wrong number of actions")));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != n_states {
                    return Err(invalid(format!("P[{s}][{a}] has the wrong length")));
                }
                check_distribution(row, &format!("P[{s}][{a}]"))?;
            }
        }
        check_distribution(&p0, "p0")?;
        Ok(Self { n_states, n_actions, transition, reward, p0, gamma })
    }

    pub fn validate_policy(&self, policy: &[Vec<f64>]) -> Result<()> {
        if policy.len() != self.n_states {
            return Err(invalid("policy needs one row per state"));
        }
        for (s, row) in policy.iter().enumerate() {
            if row.len() != self.n_actions {
                return Err(invalid(format!("policy row {s} has the wrong length")));
            }
            check_distribution(row, &format!("policy row {s}"))
                .map_err(|_| invalid(format!("policy row {s} is not a probability vector")))?;
        }
        Ok(())
    }

    /// `P_π[s][s'] = Σ_a π(a|s) P[s][a][s']`.
    pub fn policy_transition(&self, policy: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_states, self.n_states, |s, s2| {
            (0..self.n_actions).map(|a| policy[s][a] * self.transition[s][a][s2]).sum()
        })
    }

    pub fn policy_reward(&self, policy: &[Vec<f64>]) -> DVector<f64> {
        DVector::from_fn(self.n_states, |s, _| {
            (0..self.n_actions).map(|a| policy[s][a] * self.reward[s][a]).sum()
        })
    }

    /// `Q[s][a] = R[s][a] + γ Σ_{s'} P[s][a][s'] V[s']`.
    pub fn q_values(&self, v: &[f64]) -> Vec<Vec<f64>> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions)
                    .map(|a| {
                        let ev: f64 = self.transition[s][a].iter().zip(v).map(|(p, x)| p * x).sum();
                        self.reward[s][a] + self.gamma * ev
                    })
                    .collect()
            })
            .collect()
    }

    /// Expected return `J = Σ_s p0(s) V(s)`.
    pub fn expected_return(&self, policy: &[Vec<f64>]) -> Result<f64> {
        let v = finite_mdp_value(self, policy)?;
        Ok(self.p0.iter().zip(&v).map(|(p, x)| p * x).sum())
    }
}

/// Solves `(I - γ M) x = b` exactly and checks the residual.
pub fn solve_discounted(m: &DMatrix<f64>, gamma: f64, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = m.nrows();
    let lhs = DMatrix::identity(n, n) - m * gamma;
    let x = lhs
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular policy-evaluation system".into()))?;
    let residual = (&lhs * &x - b).amax();
    let scale = b.amax().max(1.0);
    if !(residual <= 1e-10 * scale) {
        return Err(Error::Numerical(format!("linear solve residual {residual:e} too large")));
    }
    Ok(x)
}

/// Exact state values: solves `V = r_π + γ P_π V`.
pub fn finite_mdp_value(m: &FiniteMdp, policy: &[Vec<f64>]) -> Result<Vec<f64>> {
    m.validate_policy(policy)?;
    let p = m.policy_transition(policy);
    let r = m.policy_reward(policy);
    Ok(solve_discounted(&p, m.gamma, &r)?.iter().copied().collect())
}

/// Discounted-ergodic occupancy `ρ(s) = Σ_t γᵗ p(s | t)`: solves `ρᵀ = p0ᵀ + γ ρᵀ P_π`.
pub fn discounted_occupancy(m: &FiniteMdp, policy: &[Vec<f64>]) -> Result<Vec<f64>> {
    m.validate_policy(policy)?;
    let p = m.policy_transition(policy).transpose();
    let p0 = DVector::from_column_slice(&m.p0);
    Ok(solve_discounted(&p, m.gamma, &p0)?.iter().copied().collect())
}

/// State distribution `p(s | t)` for `t = 0..=steps` by forward recursion.
pub fn state_marginals(m: &FiniteMdp, policy: &[Vec<f64>], steps: usize) -> Result<Vec<Vec<f64>>> {
    m.validate_policy(policy)?;
    let p = m.policy_transition(policy);
    let mut out = Vec::with_capacity(steps + 1);
    let mut cur = m.p0.clone();
    out.push(cur.clone());
    for _ in 0..steps {
        cur = (0..m.n_states)
            .map(|s2| (0..m.n_states).map(|s| cur[s] * p[(s, s2)]).sum())
            .collect();
        out.push(cur.clone());
    }
    Ok(out)
}
