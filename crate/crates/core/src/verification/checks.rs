//! Randomized identity checks and the suite runner.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::critic::{default_fit_samples, quadric_fit_hessian, QuadricCritic};
use crate::error::{invalid, Result};
use crate::features::PolynomialFeatures;
use crate::gradient::{
    covariance_iteration, do_integral_gauss, dpg_step_gradient, epg_taylor_gradient, score_integral, FnCritic,
    HessianSource, QuadratureEstimate, QuadratureRule,
};
use crate::linalg::{sym_eig, sym_exp_with_guard, ExpGuard, SymmetricMatrix};
use crate::mdp::FiniteMdp;
use crate::policy::{CovMode, GaussianPolicy};

use super::finite::{
    discounted_ergodic_error, eigenfunction_error, gaussian_surrogate_variances, policy_gradient_assemblies,
    random_mdp, rollout_variances, second_moments, GaussianSurrogate, SoftmaxTabularPolicy, FD_STEP,
};
use super::lqr::{lqr_policy_gradient_check, LqrModel};
use super::{theorem1_check, CheckStatus, VerificationReport};

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `‖a - b‖_∞ / ‖b‖_∞`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if num == 0.0 {
        0.0
    } else {
        num / den.max(f64::MIN_POSITIVE)
    }
}

fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> SymmetricMatrix {
    let mut m = SymmetricMatrix::zeros(d);
    for i in 0..d {
        for j in i..d {
            m.set_sym(i, j, scale * rng.random_range(-1.0..1.0));
        }
    }
    m
}

/// Random positive-definite root with eigenvalues in `[0.2, 1.0]`.
fn random_root<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<SymmetricMatrix> {
    let eig = sym_eig(&random_symmetric(rng, d, 1.0))?;
    // eigenvalues of a random symmetric matrix in [-d, d] mapped affinely into [0.2, 1.0]
    let lim = d as f64;
    Ok(eig.map(|l| 0.2 + 0.8 * ((l / lim).clamp(-1.0, 1.0) + 1.0) / 2.0))
}

fn random_policy<R: Rng + ?Sized>(rng: &mut R, state_dim: usize, d: usize, parameterized: bool) -> Result<GaussianPolicy> {
    let cov = if parameterized { CovMode::Parameterized } else { CovMode::Fixed(random_root(rng, d)?) };
    let mut p = GaussianPolicy::new(PolynomialFeatures::new(state_dim), d, cov)?;
    p.theta.iter_mut().for_each(|x| *x = rng.random_range(-0.5..0.5));
    Ok(p)
}

fn random_critic<R: Rng + ?Sized>(rng: &mut R, state_dim: usize, d: usize) -> Result<QuadricCritic> {
    let f = PolynomialFeatures::new(state_dim);
    let w: Vec<f64> = (0..QuadricCritic::zeros(f, d).n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
    QuadricCritic::from_flat(f, d, &w)
}

fn random_state<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Inner-integral oracle restricted to the mean-parameter block.
pub fn quadrature_oracle<Q, R>(
    policy: &GaussianPolicy,
    q: Q,
    s: &[f64],
    external_root: Option<&SymmetricMatrix>,
    method: QuadratureRule,
    rng: &mut R,
) -> Result<QuadratureEstimate>
where
    Q: Fn(&[f64], &[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut est = score_integral(policy, q, s, 0.0, external_root, method, rng)?;
    let n = policy.n_mean_params();
    est.value.truncate(n);
    if let Some(se) = est.std_error.as_mut() {
        se.truncate(n);
    }
    Ok(est)
}

/// Policy-gradient identity on random finite MDPs (`γ` alternating 0.5 / 0.9)
/// plus one `lqr2d` instance. Error is the worst max-abs discrepancy.
pub fn policy_gradient_identity_suite(n_mdps: usize, seed: u64, tolerance: f64) -> Result<VerificationReport> {
    VerificationReport::timed("policy_gradient_identity", tolerance, || {
        let mut worst: f64 = 0.0;
        for i in 0..n_mdps {
            let mut rng = rng_for(seed, i as u64);
            let ns = rng.random_range(2..=6);
            let na = rng.random_range(2..=4);
            let gamma = if i % 2 == 0 { 0.5 } else { 0.9 };
            let m = random_mdp(&mut rng, ns, na, gamma, true)?;
            let p = SoftmaxTabularPolicy::random(&mut rng, ns, na, 1.0);
            worst = worst.max(theorem1_check(&m, &p, tolerance)?.error);
        }
        let mut rng = rng_for(seed, 1000);
        let gain = DMatrix::from_fn(2, 2, |i, j| if i == j { rng.random_range(-1.5..-0.5) } else { rng.random_range(-0.3..0.3) });
        let lqr = lqr_policy_gradient_check(&LqrModel::lqr2d(), &gain, 0.09, tolerance)?;
        worst = worst.max(lqr.error);
        Ok((worst, CheckStatus::from_bool(worst <= tolerance), format!("{n_mdps} MDPs + lqr2d; lqr error {:.3e}", lqr.error)))
    })
}

/// Closed-form Gaussian integral vs order-10 Gauss–Hermite, both covariance modes.
pub fn gaussian_integral_check(n: usize, seed: u64, tolerance: f64) -> Result<VerificationReport> {
    VerificationReport::timed("gaussian_integral_exactness", tolerance, || {
        let mut rng = rng_for(seed, 1);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let d = 1 + i % 3;
            let p = random_policy(&mut rng, 2, d, i % 2 == 0)?;
            let q = random_critic(&mut rng, 2, d)?;
            let s = random_state(&mut rng, 2);
            let exact = do_integral_gauss(&p, &q, &s, None)?.total();
            let gh = score_integral(&p, |s: &[f64], a: &[f64]| q.eval(s, a), &s, 0.0, None, QuadratureRule::GaussHermite { order: 10 }, &mut rng)?;
            worst = worst.max(relative_error(&gh.value, &exact));
        }
        Ok((worst, CheckStatus::from_bool(worst <= tolerance), format!("{n} instances, d in 1..=3")))
    })
}

/// DPG direction equals the mean block of the Gaussian integral.
pub fn dpg_identity_check(n: usize, seed: u64, tolerance: f64) -> Result<VerificationReport> {
    VerificationReport::timed("dpg_mean_block_identity", tolerance, || {
        let mut rng = rng_for(seed, 2);
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let d = rng.random_range(1..=3);
            let sd = rng.random_range(1..=3);
            let parameterized = rng.random_bool(0.5);
            let p = random_policy(&mut rng, sd, d, parameterized)?;
            let q = random_critic(&mut rng, sd, d)?;
            let s = random_state(&mut rng, sd);
            let a = dpg_step_gradient(&p, &q, &s, 1.0)?.g;
            let b = do_integral_gauss(&p, &q, &s, None)?.mean_block;
            worst = worst.max(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        }
        Ok((worst, CheckStatus::from_bool(worst <= tolerance), format!("{n} instances")))
    })
}

/// `(I + h/n)ⁿ σ₀ → σ₀ eʰ`, monotone in `n ∈ {10, …, 10⁵}`.
pub fn exploration_limit_check(n_matrices: usize, seed: u64, tolerance: f64) -> Result<VerificationReport> {
    VerificationReport::timed("exploration_limit", tolerance, || {
        let mut rng = rng_for(seed, 3);
        let mut worst: f64 = 0.0;
        let mut monotone = true;
        for _ in 0..n_matrices {
            let d = rng.random_range(1..=3);
            let h0 = random_symmetric(&mut rng, d, 1.0);
            let e = sym_eig(&h0)?;
            let radius = e.max_eigenvalue().abs().max(e.min_eigenvalue().abs());
            let h = h0.scaled(rng.random_range(0.2..1.0) / radius);
            let sigma0 = rng.random_range(0.1..1.0);
            let target = sym_exp_with_guard(&h, 1.0, ExpGuard::NONE)?.matrix.scaled(sigma0).to_dmatrix();
            let tn = target.norm();
            let mut prev = f64::INFINITY;
            for k in 1..=5 {
                let it = covariance_iteration(&SymmetricMatrix::scaled_identity(d, sigma0), &h, 10usize.pow(k))?;
                let err = (it - &target).norm() / tn;
                monotone &= err < prev;
                prev = err;
            }
            worst = worst.max(prev);
        }
        let ok = monotone && worst <= tolerance;
        Ok((worst, CheckStatus::from_bool(ok), format!("{n_matrices} matrices, monotone: {monotone}")))
    })
}

/// Exact second-moment dominance and its rollout confirmation, for zero and
/// value baselines, on instances whose transitions do not depend on the action.
pub fn variance_suite(n_instances: usize, rollouts: usize, seed: u64) -> Result<VerificationReport> {
    VerificationReport::timed("variance_dominance", 0.0, || {
        let mut skipped = 0;
        let mut min_gap = f64::INFINITY;
        let mut failures = Vec::new();
        let mut worst_z: f64 = 0.0;
        for i in 0..n_instances {
            let mut rng = rng_for(seed, 100 + i as u64);
            let ns = rng.random_range(2..=4);
            let na = rng.random_range(2..=3);
            let gamma = [0.5, 0.7, 0.9][i % 3];
            let m = random_mdp(&mut rng, ns, na, gamma, false)?;
            let p = SoftmaxTabularPolicy::random(&mut rng, ns, na, 1.0);
            let critic: Vec<Vec<f64>> =
                (0..ns).map(|_| (0..na).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let probs = p.probs();
            let v_hat: Vec<f64> =
                (0..ns).map(|s| -(0..na).map(|a| probs[s][a] * critic[s][a]).sum::<f64>()).collect();
            for (label, baseline) in [("zero", vec![0.0; ns]), ("value", v_hat)] {
                let sm = second_moments(&m, &p, &critic, &baseline)?;
                if !(sm.action_variance.iter().cloned().fold(f64::INFINITY, f64::min) > 1e-12) {
                    skipped += 1;
                    continue;
                }
                let gap = sm.s1.iter().zip(&sm.s2).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
                min_gap = min_gap.min(gap);
                let (v1, v2) = sm.variances(&m.p0);
                let ro = rollout_variances(&m, &p, &critic, &baseline, rollouts, &mut rng)?;
                let z1 = (ro.var1 - v1).abs() / ro.se1.max(1e-300);
                let z2 = if ro.se2 > 0.0 { (ro.var2 - v2).abs() / ro.se2 } else { 0.0 };
                worst_z = worst_z.max(z1).max(z2);
                if !(gap > 0.0) || !(ro.var1 > ro.var2) || z1 > 4.0 || z2 > 4.0 {
                    failures.push(format!("instance {i} ({label}): gap {gap:.3e}, rollout {:.4e} vs {:.4e}", ro.var1, ro.var2));
                }
                let g = GaussianSurrogate::from_mdp(&m, 0.5, &mut rng);
                let gs = gaussian_surrogate_variances(&g, label == "value", rollouts, &mut rng)?;
                if !(gs.var1 > gs.var2) {
                    failures.push(format!("instance {i} ({label}) gaussian: {:.4e} vs {:.4e}", gs.var1, gs.var2));
                }
            }
        }
        let detail = format!(
            "min S1-S2 {min_gap:.4e}, worst rollout z {worst_z:.2}, skipped {skipped}{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        );
        let status = if skipped == 2 * n_instances { CheckStatus::Skipped } else { CheckStatus::from_bool(failures.is_empty()) };
        Ok(((-min_gap).max(0.0), status, detail))
    })
}

fn central_diff<F: FnMut(&[f64]) -> Result<f64>>(x: &[f64], mut f: F) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + FD_STEP;
        let fp = f(&xp)?;
        xp[i] = x[i] - FD_STEP;
        let fm = f(&xp)?;
        xp[i] = x[i];
        out.push((fp - fm) / (2.0 * FD_STEP));
    }
    Ok(out)
}

/// Analytic derivatives against central differences; one report per quantity.
pub fn gradient_checks(n: usize, seed: u64, tolerance: f64) -> Result<Vec<VerificationReport>> {
    let mut reports = Vec::new();
    reports.push(VerificationReport::timed("log_prob_grad_fd", tolerance, || {
        let mut rng = rng_for(seed, 4);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let d = 1 + i % 3;
            let p = random_policy(&mut rng, 2, d, i % 2 == 0)?;
            let s = random_state(&mut rng, 2);
            let a: Vec<f64> = p.mean(&s).iter().map(|m| m + rng.random_range(-1.0..1.0)).collect();
            let an = p.log_prob_grad(&s, &a, None)?;
            let fd = central_diff(&p.theta, |th| p.clone().with_theta(th.to_vec())?.log_density(&s, &a, None))?;
            worst = worst.max(relative_error(&fd, &an));
        }
        Ok((worst, CheckStatus::from_bool(worst <= tolerance), format!("{n} inputs")))
    })?);
    reports.push(VerificationReport::timed("entropy_grad_fd", tolerance, || {
        let mut rng = rng_for(seed, 5);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let p = random_policy(&mut rng, 2, 1 + i % 3, true)?;
            let an = p.entropy_grad(&[0.0, 0.0]);
            let fd = central_diff(&p.theta, |th| p.clone().with_theta(th.to_vec())?.entropy(None))?;
            worst = worst.max(relative_error(&fd, &an));
        }
        Ok((worst, CheckStatus::from_bool(worst <= tolerance), format!("{n} inputs")))
    })?);
    reports.push(VerificationReport::timed("mean_jacobian_fd", tolerance, || {
        let mut rng = rng_for(seed, 6);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let d = 1 + i % 3;
            let p = random_policy(&mut rng, 3, d, false)?;
            let s = random_state(&mut rng, 3);
            let jac = p.mean_jacobian(&s);
            for j in 0..d {
                let an: Vec<f64> = (0..p.n_mean_params()).map(|r| jac[r * d + j]).collect();
                let fd = central_diff(&p.theta, |th| Ok(p.clone().with_theta(th.to_vec())?.mean(&s)[j]))?;
                worst = worst.max(relative_error(&fd, &an));
            }
        }
        Ok((worst, CheckStatus::from_bool(worst <= tolerance), format!("{n} inputs")))
    })?);
    reports.push(VerificationReport::timed("return_gradient_fd", tolerance, || {
        let mut rng = rng_for(seed, 7);
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let ns = rng.random_range(2..=5);
            let na = rng.random_range(2..=3);
            let gamma = rng.random_range(0.0..0.95);
            let m = random_mdp(&mut rng, ns, na, gamma, true)?;
            let p = SoftmaxTabularPolicy::random(&mut rng, ns, na, 1.0);
            let asm = policy_gradient_assemblies(&m, &p)?;
            worst = worst.max(relative_error(&asm.direct, &asm.score_form));
        }
        Ok((worst, CheckStatus::from_bool(worst <= tolerance), format!("{n} MDPs, analytic score form vs differences")))
    })?);
    Ok(reports)
}

/// Exact recovery of quadric Hessians, and `O(r²)` degradation under a quartic
/// perturbation centred at the fit point.
pub fn hessian_fit_checks(n: usize, seed: u64, tolerance: f64) -> Result<Vec<VerificationReport>> {
    let exact = VerificationReport::timed("quadric_fit_exact", tolerance, || {
        let mut rng = rng_for(seed, 8);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let d = 1 + i % 3;
            let q = random_critic(&mut rng, 2, d)?;
            let s = random_state(&mut rng, 2);
            let mu = random_state(&mut rng, d);
            let fit = quadric_fit_hessian(|s: &[f64], a: &[f64]| q.eval(s, a), &s, &mu, 0.1, default_fit_samples(d), &mut rng)?;
            let h = q.action_hessian(&s);
            worst = worst.max(relative_error(fit.hessian.as_slice(), h.as_slice()));
        }
        Ok((worst, CheckStatus::from_bool(worst <= tolerance), format!("{n} critics")))
    })?;
    // with a fixed standardized sample, the quartic contributes exactly r² · const
    let radii = [0.4, 0.2, 0.1, 0.05];
    let quartic = VerificationReport::timed("quadric_fit_quartic_scaling", 0.1, || {
        let mut worst: f64 = 0.0;
        let mut detail = String::new();
        for i in 0..n.min(20) {
            let d = 1 + i % 3;
            let mut rng = rng_for(seed, 200 + i as u64);
            let q = random_critic(&mut rng, 2, d)?;
            let s = random_state(&mut rng, 2);
            let mu = random_state(&mut rng, d);
            let h = q.action_hessian(&s);
            let f = |s: &[f64], a: &[f64]| q.eval(s, a) + a.iter().zip(&mu).map(|(x, m)| (x - m).powi(4)).sum::<f64>();
            let mut errs = Vec::new();
            for &r in &radii {
                let mut fit_rng = rng_for(seed, 300 + i as u64);
                let fit = quadric_fit_hessian(f, &s, &mu, r, default_fit_samples(d), &mut fit_rng)?;
                errs.push(fit.hessian.sub(&h)?.frobenius_norm());
            }
            for w in errs.windows(2) {
                // halving r should divide the error by 4
                let ratio = w[0] / w[1];
                worst = worst.max((ratio / 4.0 - 1.0).abs());
            }
            if i == 0 {
                detail = format!("errors {:?} at radii {:?}", errs, radii);
            }
        }
        Ok((worst, CheckStatus::from_bool(worst <= 0.1), detail))
    })?;
    Ok(vec![exact, quartic])
}

/// Taylor-approximation error against quadrature shrinks linearly in the size of a cubic perturbation.
pub fn taylor_error_scaling_check(seed: u64) -> Result<VerificationReport> {
    VerificationReport::timed("taylor_error_linear_in_perturbation", 0.1, || {
        let mut rng = rng_for(seed, 9);
        let mut worst: f64 = 0.0;
        let mut detail = String::new();
        for d in 1..=3 {
            let p = random_policy(&mut rng, 2, d, false)?;
            let q = random_critic(&mut rng, 2, d)?;
            let s = random_state(&mut rng, 2);
            let mut errs = Vec::new();
            for eps in [0.1, 0.01, 0.001] {
                let qq = q.clone();
                let qg = q.clone();
                let qh = q.clone();
                let critic = FnCritic {
                    value: move |s: &[f64], a: &[f64]| qq.eval(s, a) + eps * a.iter().map(|x| x.powi(3)).sum::<f64>(),
                    gradient: move |s: &[f64], a: &[f64]| {
                        qg.action_gradient(s, a).iter().zip(a).map(|(g, x)| g + 3.0 * eps * x * x).collect()
                    },
                    hessian: move |s: &[f64], a: &[f64]| {
                        let mut h = qh.action_hessian(s);
                        for (j, x) in a.iter().enumerate() {
                            h.set_sym(j, j, h.get(j, j) + 6.0 * eps * x);
                        }
                        h
                    },
                };
                let taylor = epg_taylor_gradient(&p, &critic, &s, HessianSource::Analytic, None, &mut rng)?.g;
                let oracle = quadrature_oracle(&p, |s: &[f64], a: &[f64]| crate::gradient::ActionCritic::value(&critic, s, a), &s, None, QuadratureRule::GaussHermite { order: 10 }, &mut rng)?;
                let diff = taylor[..p.n_mean_params()].iter().zip(&oracle.value).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                errs.push(diff);
            }
            for w in errs.windows(2) {
                worst = worst.max((w[0] / w[1] / 10.0 - 1.0).abs());
            }
            detail.push_str(&format!("d={d}: [{}] ", errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")));
        }
        Ok((worst, CheckStatus::from_bool(worst <= 0.1), detail.trim_end().to_string()))
    })
}

/// Gauss–Hermite and Monte Carlo agree on a non-polynomial critic.
pub fn quadrature_agreement_check(samples: usize, seed: u64) -> Result<VerificationReport> {
    VerificationReport::timed("quadrature_gh_vs_mc", 3.29, || {
        let mut rng = rng_for(seed, 10);
        let p = GaussianPolicy::new(PolynomialFeatures::new(1), 1, CovMode::Fixed(SymmetricMatrix::diag(&[0.5])))?;
        let q = |_: &[f64], a: &[f64]| a[0].sin();
        let gh = quadrature_oracle(&p, q, &[0.0], None, QuadratureRule::GaussHermite { order: 10 }, &mut rng)?;
        let mc = quadrature_oracle(&p, q, &[0.0], None, QuadratureRule::MonteCarlo { samples }, &mut rng)?;
        let se = mc.std_error.expect("monte carlo");
        // only the bias weight sees a nonzero score at s = 0
        let z = (gh.value[0] - mc.value[0]).abs() / se[0];
        Ok((z, CheckStatus::from_bool(z <= 3.29), format!("gh {:.8} mc {:.8} ± {:.2e}", gh.value[0], mc.value[0], se[0])))
    })
}

/// Occupancy identities on random MDPs (≤5 states, ≤3 actions).
pub fn occupancy_checks(n: usize, seed: u64, tolerance: f64) -> Result<VerificationReport> {
    VerificationReport::timed("occupancy_identities", tolerance, || {
        let mut rng = rng_for(seed, 11);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let ns = rng.random_range(1..=5);
            let na = rng.random_range(1..=3);
            let m: FiniteMdp = random_mdp(&mut rng, ns, na, [0.0, 0.5, 0.9, 0.99][i % 4], true)?;
            let pi = SoftmaxTabularPolicy::random(&mut rng, ns, na, 1.0).probs();
            let f = random_state(&mut rng, ns);
            worst = worst.max(discounted_ergodic_error(&m, &pi, &f)?).max(eigenfunction_error(&m, &pi, &f)?);
        }
        Ok((worst, CheckStatus::from_bool(worst <= tolerance), format!("{n} MDPs")))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Fast,
    All,
}

impl std::str::FromStr for Suite {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Self::Fast),
            "all" => Ok(Self::All),
            other => Err(invalid(format!("unknown suite '{other}' (expected fast or all)"))),
        }
    }
}

/// Every check with its pinned tolerance; `Fast` shrinks instance counts.
pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<VerificationReport>> {
    let full = suite == Suite::All;
    let pick = |fast: usize, all: usize| if full { all } else { fast };
    let mut out = vec![
        policy_gradient_identity_suite(pick(5, 20), seed, 1e-4)?,
        gaussian_integral_check(pick(30, 100), seed, 1e-8)?,
        dpg_identity_check(pick(200, 1000), seed, 1e-12)?,
        exploration_limit_check(pick(5, 20), seed, 1e-4)?,
        variance_suite(pick(4, 20), pick(2000, 10_000), seed)?,
        occupancy_checks(pick(10, 20), seed, 1e-9)?,
        taylor_error_scaling_check(seed)?,
        quadrature_agreement_check(pick(1_000_000, 10_000_000), seed)?,
    ];
    out.extend(gradient_checks(pick(20, 100), seed, 1e-5)?);
    out.extend(hessian_fit_checks(pick(20, 100), seed, 1e-6)?);
    Ok(out)
}
