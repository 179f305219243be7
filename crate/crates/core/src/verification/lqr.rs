//! Closed-form oracles on the linear-quadratic environment: exact value of a
//! linear-Gaussian policy, the policy-gradient identity by Gauss–Hermite
//! quadrature, and the finite-horizon Riccati optimum.

use nalgebra::{DMatrix, DVector};

use crate::env::Lqr2d;
use crate::error::{invalid, Error, Result};
use crate::linalg::{sym_sqrt, SymmetricMatrix};
use crate::quadrature::GaussHermite;

use super::finite::{max_abs_diff, FD_STEP};
use super::{CheckStatus, VerificationReport};

/// `s' = A s + B a + w`, reward `-(sᵀ s + r aᵀ a)`, ignoring action clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub action_cost: f64,
    pub noise_var: f64,
    pub gamma: f64,
    /// Start-state covariance (zero mean).
    pub p0_cov: DMatrix<f64>,
}

impl LqrModel {
    /// The `lqr2d` environment: start states uniform on `[-1, 1]²`.
    pub fn lqr2d() -> Self {
        let i = DMatrix::<f64>::identity(2, 2);
        Self {
            a: &i * Lqr2d::STATE_GAIN,
            b: &i * Lqr2d::ACTION_GAIN,
            action_cost: Lqr2d::ACTION_COST,
            noise_var: Lqr2d::NOISE_VAR,
            gamma: 0.9,
            p0_cov: &i / 3.0,
        }
    }

    fn n(&self) -> usize {
        self.a.nrows()
    }

    fn closed_loop(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a + &self.b * k
    }
}

/// `X = M + γ Lᵀ X L` via the vectorized linear system.
fn discounted_lyapunov(l: &DMatrix<f64>, m: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    let n = l.nrows();
    let lt = l.transpose();
    let big = DMatrix::identity(n * n, n * n) - lt.kronecker(&lt) * gamma;
    let rhs = DVector::from_column_slice(m.as_slice());
    let x = big.lu().solve(&rhs).ok_or_else(|| Error::Numerical("singular Lyapunov system".into()))?;
    let x = DMatrix::from_column_slice(n, n, x.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

/// Value `V(s) = sᵀ P s + k` of the policy `a ~ N(K s, σ² I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrValue {
    pub p: DMatrix<f64>,
    pub k: f64,
}

pub fn lqr_policy_value(model: &LqrModel, gain: &DMatrix<f64>, action_var: f64) -> Result<LqrValue> {
    let n = model.n();
    if gain.nrows() != model.b.ncols() || gain.ncols() != n {
        return Err(invalid("gain has the wrong shape"));
    }
    let l = model.closed_loop(gain);
    let radius = l.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(model.gamma * radius * radius < 1.0) {
        return Err(Error::Numerical(format!("closed loop spectral radius {radius} makes the value diverge")));
    }
    let m = -(DMatrix::identity(n, n) + gain.transpose() * gain * model.action_cost);
    let p = discounted_lyapunov(&l, &m, model.gamma)?;
    let na = model.b.ncols();
    let noise = &model.b * model.b.transpose() * action_var + DMatrix::identity(n, n) * model.noise_var;
    let k = (model.gamma * (&p * noise).trace() - model.action_cost * action_var * na as f64) / (1.0 - model.gamma);
    Ok(LqrValue { p, k })
}

/// `J = E_{p0}[V(s)] = tr(P C₀) + k`.
pub fn lqr_policy_return(model: &LqrModel, gain: &DMatrix<f64>, action_var: f64) -> Result<f64> {
    let v = lqr_policy_value(model, gain, action_var)?;
    Ok((&v.p * &model.p0_cov).trace() + v.k)
}

fn perturbed(gain: &DMatrix<f64>, idx: usize, delta: f64) -> DMatrix<f64> {
    let mut g = gain.clone();
    let nc = g.ncols();
    g[(idx / nc, idx % nc)] += delta;
    g
}

/// The three evaluations of `∇_K J` (row-major over `K`).
#[derive(Debug, Clone, PartialEq)]
pub struct LqrGradientAssemblies {
    pub direct: Vec<f64>,
    pub occupancy_form: Vec<f64>,
    pub score_form: Vec<f64>,
}

/// `Σ_t γᵗ Cov(s_t) = C₀ + γ L S Lᵀ + γ N / (1 - γ)`.
fn discounted_state_moment(model: &LqrModel, gain: &DMatrix<f64>, action_var: f64) -> Result<DMatrix<f64>> {
    let n = model.n();
    let l = model.closed_loop(gain);
    let noise = &model.b * model.b.transpose() * action_var + DMatrix::identity(n, n) * model.noise_var;
    let m = &model.p0_cov + noise * (model.gamma / (1.0 - model.gamma));
    // S = M + γ L S Lᵀ is the transposed Lyapunov form
    discounted_lyapunov(&l.transpose(), &m, model.gamma)
}

pub fn lqr_gradient_assemblies(
    model: &LqrModel,
    gain: &DMatrix<f64>,
    action_var: f64,
    gh_order: usize,
) -> Result<LqrGradientAssemblies> {
    let n = model.n();
    let na = model.b.ncols();
    let np = na * n;
    let h2 = 2.0 * FD_STEP;
    let direct = (0..np)
        .map(|i| {
            let jp = lqr_policy_return(model, &perturbed(gain, i, FD_STEP), action_var)?;
            let jm = lqr_policy_return(model, &perturbed(gain, i, -FD_STEP), action_var)?;
            Ok((jp - jm) / h2)
        })
        .collect::<Result<Vec<f64>>>()?;

    let base = lqr_policy_value(model, gain, action_var)?;
    let mut dp = Vec::with_capacity(np);
    let mut dk = Vec::with_capacity(np);
    for i in 0..np {
        let vp = lqr_policy_value(model, &perturbed(gain, i, FD_STEP), action_var)?;
        let vm = lqr_policy_value(model, &perturbed(gain, i, -FD_STEP), action_var)?;
        dp.push((&vp.p - &vm.p) / h2);
        dk.push((vp.k - vm.k) / h2);
    }
    let w_tr = model.noise_var;
    let q_value = |v_p: &DMatrix<f64>, v_k: f64, s: &DVector<f64>, a: &DVector<f64>| -> f64 {
        let next = &model.a * s + &model.b * a;
        let r = -(s.dot(s) + model.action_cost * a.dot(a));
        r + model.gamma * ((next.transpose() * v_p * &next)[(0, 0)] + w_tr * v_p.trace() + v_k)
    };

    let smoment = discounted_state_moment(model, gain, action_var)?;
    // ρ has mass 1/(1-γ); its normalized second moment is (1-γ) S
    let cbar = SymmetricMatrix::from_dmatrix(&(&smoment * (1.0 - model.gamma)))?;
    let s_root = sym_sqrt(&cbar)?;
    let a_root = SymmetricMatrix::scaled_identity(na, action_var.sqrt());
    let gh = GaussHermite::new(gh_order)?;
    let mass = 1.0 / (1.0 - model.gamma);
    let zeros = vec![0.0; n];
    let out = gh.expect(&zeros, &s_root, |s, _| {
        let s = DVector::from_column_slice(s);
        let mu = gain * &s;
        let mut acc = vec![0.0; 2 * np];
        // ∇V(s) - E_a ∇Q(s, a)
        for i in 0..np {
            acc[i] = (s.transpose() * &dp[i] * &s)[(0, 0)] + dk[i];
        }
        let inner = gh.expect(mu.as_slice(), &a_root, |a, _| {
            let av = DVector::from_column_slice(a);
            let mut v = vec![0.0; 2 * np];
            // the reward has no θ dependence, so ∇Q = γ ∇E[V(s')]
            let next = &model.a * &s + &model.b * &av;
            for i in 0..np {
                v[i] = model.gamma * ((next.transpose() * &dp[i] * &next)[(0, 0)] + w_tr * dp[i].trace() + dk[i]);
            }
            let q = q_value(&base.p, base.k, &s, &av);
            for r in 0..na {
                for c in 0..n {
                    v[np + r * n + c] = (a[r] - mu[r]) / action_var * s[c] * q;
                }
            }
            v
        });
        for i in 0..np {
            acc[i] -= inner[i];
            acc[np + i] = inner[np + i];
        }
        acc.iter().map(|x| x * mass).collect()
    });
    Ok(LqrGradientAssemblies {
        direct,
        occupancy_form: out[..np].to_vec(),
        score_form: out[np..].to_vec(),
    })
}

/// The policy-gradient identity on `lqr2d` with every integral by quadrature.
pub fn lqr_policy_gradient_check(
    model: &LqrModel,
    gain: &DMatrix<f64>,
    action_var: f64,
    tolerance: f64,
) -> Result<VerificationReport> {
    VerificationReport::timed("policy_gradient_identity_lqr", tolerance, || {
        let asm = lqr_gradient_assemblies(model, gain, action_var, 10)?;
        let e1 = max_abs_diff(&asm.direct, &asm.occupancy_form);
        let e2 = max_abs_diff(&asm.direct, &asm.score_form);
        let err = e1.max(e2);
        Ok((err, CheckStatus::from_bool(err <= tolerance), format!("occupancy form {e1:.3e}, score form {e2:.3e}")))
    })
}

/// Optimal finite-horizon controller: cost-to-go matrices `P_t`, gains `K_t`
/// (`a_t = K_t s_t`) and the accumulated noise cost.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub p: Vec<DMatrix<f64>>,
    pub gains: Vec<DMatrix<f64>>,
    /// `Σ_{t≥1} tr(P_t W)`: expected cost contributed by process noise.
    pub noise_cost: f64,
}

/// Undiscounted backward Riccati recursion over `horizon` rewards.
pub fn riccati_finite_horizon(model: &LqrModel, horizon: usize) -> Result<RiccatiSolution> {
    let n = model.n();
    let na = model.b.ncols();
    let q = DMatrix::<f64>::identity(n, n);
    let r = DMatrix::<f64>::identity(na, na) * model.action_cost;
    let mut p = vec![DMatrix::zeros(n, n); horizon + 1];
    let mut gains = vec![DMatrix::zeros(na, n); horizon];
    let mut noise_cost = 0.0;
    for t in (0..horizon).rev() {
        let pn = &p[t + 1];
        let btp = model.b.transpose() * pn;
        let s = &r + &btp * &model.b;
        let k = -s
            .lu()
            .solve(&(&btp * &model.a))
            .ok_or_else(|| Error::Numerical("singular Riccati step".into()))?;
        let l = &model.a + &model.b * &k;
        let pt = &q + k.transpose() * &r * &k + l.transpose() * pn * &l;
        noise_cost += model.noise_var * pn.trace();
        p[t] = (&pt + pt.transpose()) * 0.5;
        gains[t] = k;
    }
    Ok(RiccatiSolution { p, gains, noise_cost })
}

/// Mean optimal (undiscounted, unclipped) return over the given start states.
pub fn lqr_optimal_return(model: &LqrModel, horizon: usize, starts: &[Vec<f64>]) -> Result<f64> {
    if starts.is_empty() {
        return Err(invalid("need at least one start state"));
    }
    let sol = riccati_finite_horizon(model, horizon)?;
    let total: f64 = starts
        .iter()
        .map(|s| {
            let v = DVector::from_column_slice(s);
            -((v.transpose() * &sol.p[0] * &v)[(0, 0)] + sol.noise_cost)
        })
        .sum();
    Ok(total / starts.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Environment;

    #[test]
    fn closed_form_value_matches_scalar_geometric_series() {
        // K = 0, no action noise: P = -(I + 0.81 I + ...) = -I / (1 - 0.81)
        let mut model = LqrModel::lqr2d();
        model.noise_var = 0.0;
        let v = lqr_policy_value(&model, &DMatrix::zeros(2, 2), 0.0).unwrap();
        assert!((v.p[(0, 0)] + 1.0 / (1.0 - 0.9 * 0.81)).abs() < 1e-12);
        assert!(v.k.abs() < 1e-15 && v.p[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn policy_gradient_identity_on_lqr() {
        let model = LqrModel::lqr2d();
        let gain = DMatrix::from_row_slice(2, 2, &[-0.8, 0.1, 0.2, -0.5]);
        let r = lqr_policy_gradient_check(&model, &gain, 0.09, 1e-4).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn riccati_matches_brute_force_rollout() {
        // deterministic dynamics: the optimal return is reproduced by rollout
        let mut model = LqrModel::lqr2d();
        model.noise_var = 0.0;
        let sol = riccati_finite_horizon(&model, 100).unwrap();
        let s0 = vec![0.7, -0.4];
        let mut env = Lqr2d::with_noise_std(0, 0.0);
        env.set_state(&s0).unwrap();
        let mut total = 0.0;
        for t in 0..100 {
            let s = DVector::from_column_slice(env.state());
            let a = &sol.gains[t] * s;
            total += env.step(a.as_slice()).unwrap().1;
        }
        let oracle = lqr_optimal_return(&model, 100, &[s0]).unwrap();
        assert!((total - oracle).abs() < 1e-10 * oracle.abs(), "{total} vs {oracle}");
    }
}
