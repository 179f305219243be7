//! State-conditioned Gaussian policy `N(μ_s, Σ_s)`.
//!
//! The mean is linear in polynomial state features, `μ_s = W φ(s)`, with `W`
//! stored row-major at the front of `theta`. The covariance root `Σ^{1/2}`
//! either is fixed, is `diag(exp(θ_σ))` with `θ_σ` appended to `theta`, or is
//! supplied per state by the caller (Hessian-driven exploration).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::features::PolynomialFeatures;
use crate::linalg::{dot, sym_eig, SymmetricMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovMode {
    /// Constant `Σ^{1/2}`.
    Fixed(SymmetricMatrix),
    /// State-independent `Σ^{1/2} = diag(exp(θ_σ))`.
    Parameterized,
    /// `Σ^{1/2}` is provided by the caller for each state.
    HessianDriven,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub features: PolynomialFeatures,
    pub action_dim: usize,
    pub theta: Vec<f64>,
    pub cov_mode: CovMode,
}

fn check_root(root: &SymmetricMatrix) -> Result<()> {
    let eig = sym_eig(root)?;
    if !(eig.min_eigenvalue() > 0.0) {
        return Err(Error::InvalidPolicy(format!(
            "covariance root must be positive definite (min eigenvalue {:e})",
            eig.min_eigenvalue()
        )));
    }
    Ok(())
}

impl GaussianPolicy {
    /// Zero mean weights; parameterized log-stds start at zero (unit std).
    pub fn new(features: PolynomialFeatures, action_dim: usize, cov_mode: CovMode) -> Result<Self> {
        if action_dim == 0 {
            return Err(invalid("action dimension must be positive"));
        }
        if let CovMode::Fixed(root) = &cov_mode {
            if root.dim() != action_dim {
                return Err(invalid("fixed covariance root has the wrong dimension"));
            }
            check_root(root)?;
        }
        let n_cov = if cov_mode == CovMode::Parameterized { action_dim } else { 0 };
        let theta = vec![0.0; action_dim * features.len() + n_cov];
        Ok(Self { features, action_dim, theta, cov_mode })
    }

    pub fn with_theta(mut self, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != self.theta.len() {
            return Err(invalid(format!(
                "expected {} parameters, got {}",
                self.theta.len(),
                theta.len()
            )));
        }
        self.theta = theta;
        Ok(self)
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    pub fn n_mean_params(&self) -> usize {
        self.action_dim * self.features.len()
    }

    pub fn log_std(&self) -> Option<&[f64]> {
        match self.cov_mode {
            CovMode::Parameterized => Some(&self.theta[self.n_mean_params()..]),
            _ => None,
        }
    }

    pub fn mean(&self, s: &[f64]) -> Vec<f64> {
        self.mean_from_features(&self.features.eval(s))
    }

    pub fn mean_from_features(&self, phi: &[f64]) -> Vec<f64> {
        let nf = phi.len();
        (0..self.action_dim)
            .map(|i| dot(&self.theta[i * nf..(i + 1) * nf], phi))
            .collect()
    }

    /// `∂μ_j / ∂θ_r` as a row-major `(n_mean_params x action_dim)` matrix.
    pub fn mean_jacobian(&self, s: &[f64]) -> Vec<f64> {
        let phi = self.features.eval(s);
        let (d, nf) = (self.action_dim, phi.len());
        let mut jac = vec![0.0; d * nf * d];
        for i in 0..d {
            for (k, &p) in phi.iter().enumerate() {
                jac[(i * nf + k) * d + i] = p;
            }
        }
        jac
    }

    /// Full-length θ gradient `J_μ(s)ᵀ v` (zero on covariance parameters).
    pub fn mean_pullback(&self, s: &[f64], v: &[f64]) -> Vec<f64> {
        let phi = self.features.eval(s);
        let mut g = vec![0.0; self.n_params()];
        self.add_mean_pullback(&phi, v, 1.0, &mut g);
        g
    }

    pub(crate) fn add_mean_pullback(&self, phi: &[f64], v: &[f64], weight: f64, out: &mut [f64]) {
        let nf = phi.len();
        for (i, &vi) in v.iter().enumerate() {
            for (k, &p) in phi.iter().enumerate() {
                out[i * nf + k] += weight * vi * p;
            }
        }
    }

    /// Effective `Σ^{1/2}`; `external` is required (and only used) in Hessian-driven mode.
    pub fn covariance_root(&self, external: Option<&SymmetricMatrix>) -> Result<SymmetricMatrix> {
        match &self.cov_mode {
            CovMode::Fixed(root) => Ok(root.clone()),
            CovMode::Parameterized => {
                let stds: Vec<f64> = self.log_std().unwrap().iter().map(|l| l.exp()).collect();
                Ok(SymmetricMatrix::diag(&stds))
            }
            CovMode::HessianDriven => {
                let root = external.ok_or_else(|| {
                    Error::InvalidPolicy("hessian-driven policy needs an external covariance root".into())
                })?;
                if root.dim() != self.action_dim {
                    return Err(invalid("external covariance root has the wrong dimension"));
                }
                Ok(root.clone())
            }
        }
    }

    /// `a = μ_s + Σ^{1/2} z` for a given standard-normal `z`.
    pub fn action_from_noise(&self, s: &[f64], root: &SymmetricMatrix, z: &[f64]) -> Vec<f64> {
        let mu = self.mean(s);
        let noise = root.matvec(z);
        mu.iter().zip(&noise).map(|(m, n)| m + n).collect()
    }

    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        s: &[f64],
        external: Option<&SymmetricMatrix>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let root = self.covariance_root(external)?;
        let z: Vec<f64> = (0..self.action_dim).map(|_| rng.sample(StandardNormal)).collect();
        Ok(self.action_from_noise(s, &root, &z))
    }

    /// `Σ⁻¹` and `ln det Σ` from the covariance root.
    pub fn precision(&self, root: &SymmetricMatrix) -> Result<(SymmetricMatrix, f64)> {
        let eig = sym_eig(root)?;
        let min = eig.min_eigenvalue();
        if !(min > 1e-150) {
            return Err(Error::InvalidPolicy(format!("singular covariance (root eigenvalue {min:e})")));
        }
        let log_det = 2.0 * eig.eigenvalues.iter().map(|l| l.ln()).sum::<f64>();
        Ok((eig.map(|l| 1.0 / (l * l)), log_det))
    }

    pub fn log_density(&self, s: &[f64], a: &[f64], external: Option<&SymmetricMatrix>) -> Result<f64> {
        let root = self.covariance_root(external)?;
        let (prec, log_det) = self.precision(&root)?;
        let mu = self.mean(s);
        let diff: Vec<f64> = a.iter().zip(&mu).map(|(x, m)| x - m).collect();
        let d = self.action_dim as f64;
        Ok(-0.5 * prec.quad_form(&diff) - 0.5 * (log_det + d * (2.0 * std::f64::consts::PI).ln()))
    }

    /// `∇_θ log N(a; μ_s, Σ_s)`.
    pub fn log_prob_grad(&self, s: &[f64], a: &[f64], external: Option<&SymmetricMatrix>) -> Result<Vec<f64>> {
        if a.len() != self.action_dim {
            return Err(invalid("action has the wrong dimension"));
        }
        let root = self.covariance_root(external)?;
        let (prec, _) = self.precision(&root)?;
        let phi = self.features.eval(s);
        let mu = self.mean_from_features(&phi);
        let diff: Vec<f64> = a.iter().zip(&mu).map(|(x, m)| x - m).collect();
        let mut g = vec![0.0; self.n_params()];
        self.add_mean_pullback(&phi, &prec.matvec(&diff), 1.0, &mut g);
        if let Some(log_std) = self.log_std() {
            let off = self.n_mean_params();
            for (j, l) in log_std.iter().enumerate() {
                let z = diff[j] / l.exp();
                g[off + j] = z * z - 1.0;
            }
        }
        Ok(g)
    }

    /// Differential entropy `½ ln det(2πe Σ)`.
    pub fn entropy(&self, external: Option<&SymmetricMatrix>) -> Result<f64> {
        let root = self.covariance_root(external)?;
        let (_, log_det) = self.precision(&root)?;
        let d = self.action_dim as f64;
        Ok(0.5 * (log_det + d * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()))
    }

    /// `∇_θ` of the entropy: ones on the log-std block, zero elsewhere.
    pub fn entropy_grad(&self, _s: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n_params()];
        if self.log_std().is_some() {
            let off = self.n_mean_params();
            g[off..].iter_mut().for_each(|x| *x = 1.0);
        }
        g
    }

    /// Contracts `m` (a gradient with respect to `Σ^{1/2}`) against `∇_θ Σ^{1/2}`.
    ///
    /// Zero unless the covariance is parameterized; exact for the diagonal root.
    pub fn covariance_pullback(&self, m: &SymmetricMatrix) -> Vec<f64> {
        let mut g = vec![0.0; self.n_params()];
        if let Some(log_std) = self.log_std() {
            let off = self.n_mean_params();
            for (j, l) in log_std.iter().enumerate() {
                g[off + j] = l.exp() * m.get(j, j);
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_1d(cov: CovMode) -> GaussianPolicy {
        // state_dim 1 features [1, s, s²]; μ = θ_bias when s = 0
        GaussianPolicy::new(PolynomialFeatures::new(1), 1, cov).unwrap()
    }

    #[test]
    fn degenerate_covariance_samples_the_mean() {
        let mut p = GaussianPolicy::new(
            PolynomialFeatures::new(2),
            2,
            CovMode::Fixed(SymmetricMatrix::scaled_identity(2, 1e-12)),
        )
        .unwrap();
        p.theta[0] = 1.0;
        p.theta[6] = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = p.sample_action(&[0.3, -0.2], None, &mut rng).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-10 && (a[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn affine_noise_transform() {
        let mut p = GaussianPolicy::new(
            PolynomialFeatures::new(1),
            2,
            CovMode::Fixed(SymmetricMatrix::identity(2)),
        )
        .unwrap();
        p.theta[0] = 1.0;
        p.theta[3] = 2.0;
        let root = p.covariance_root(None).unwrap();
        assert_eq!(p.action_from_noise(&[0.0], &root, &[0.5, -0.5]), vec![1.5, 1.5]);
    }

    #[test]
    fn score_vanishes_at_mean() {
        let mut p = GaussianPolicy::new(
            PolynomialFeatures::new(2),
            2,
            CovMode::Fixed(SymmetricMatrix::diag(&[0.3, 0.7])),
        )
        .unwrap();
        p.theta.iter_mut().enumerate().for_each(|(i, t)| *t = 0.1 * i as f64);
        let s = [0.4, -1.1];
        let g = p.log_prob_grad(&s, &p.mean(&s), None).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn one_dimensional_score() {
        let p = identity_1d(CovMode::Fixed(SymmetricMatrix::identity(1)));
        let g = p.log_prob_grad(&[0.0], &[1.0], None).unwrap();
        assert_eq!(g[0], 1.0);
    }

    #[test]
    fn entropy_grad_cases() {
        let p = identity_1d(CovMode::Fixed(SymmetricMatrix::identity(1)));
        assert!(p.entropy_grad(&[0.3]).iter().all(|&x| x == 0.0));
        let p = identity_1d(CovMode::Parameterized);
        let g = p.entropy_grad(&[0.3]);
        assert_eq!(g, vec![0.0, 0.0, 0.0, 1.0]);
        let h0 = p.entropy(None).unwrap();
        let p2 = p.clone().with_theta(vec![0.0, 0.0, 0.0, 0.25]).unwrap();
        assert!((p2.entropy(None).unwrap() - h0 - 0.25).abs() < 1e-14);
    }

    #[test]
    fn hessian_driven_requires_external_root() {
        let p = identity_1d(CovMode::HessianDriven);
        assert!(matches!(p.covariance_root(None), Err(Error::InvalidPolicy(_))));
        let root = SymmetricMatrix::scaled_identity(1, 0.5);
        assert_eq!(p.covariance_root(Some(&root)).unwrap(), root);
    }

    #[test]
    fn fixed_root_must_be_positive_definite() {
        let bad = CovMode::Fixed(SymmetricMatrix::diag(&[1.0, 0.0]));
        assert!(GaussianPolicy::new(PolynomialFeatures::new(1), 2, bad).is_err());
    }

    #[test]
    fn jacobian_layout() {
        let mut p = GaussianPolicy::new(PolynomialFeatures::new(1), 2, CovMode::Parameterized).unwrap();
        p.theta[..6].copy_from_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let jac = p.mean_jacobian(&[2.0]);
        // rows: W00 W01 W02 W10 W11 W12; columns: μ0 μ1
        assert_eq!(jac, vec![1.0, 0.0, 2.0, 0.0, 4.0, 0.0, 0.0, 1.0, 0.0, 2.0, 0.0, 4.0]);
        assert_eq!(p.mean(&[2.0]), vec![1.0 + 4.0 + 12.0, 4.0 + 10.0 + 24.0]);
    }
}
