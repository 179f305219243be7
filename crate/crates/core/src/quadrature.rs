//! Gauss–Hermite and Monte Carlo expectations under Gaussian measures.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::linalg::SymmetricMatrix;

/// Gauss–Hermite rule for the standard normal: `E[f(z)] ≈ Σ_i w_i f(x_i)`.
///
/// An order-`n` rule integrates polynomials up to degree `2n - 1` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > 100 {
            return Err(invalid("Gauss-Hermite order must be in 1..=100"));
        }
        let n = order;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let nf = n as f64;
        let mut z: f64 = 0.0;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        // physicists' rule -> standard normal
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let nodes = x.iter().rev().map(|v| v * std::f64::consts::SQRT_2).collect();
        let weights = w.iter().rev().map(|v| v / sqrt_pi).collect();
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Tensor-product expectation of a vector-valued `f` under `N(μ, root rootᵀ)`.
    pub fn expect<F>(&self, mu: &[f64], root: &SymmetricMatrix, mut f: F) -> Vec<f64>
    where
        F: FnMut(&[f64], &[f64]) -> Vec<f64>,
    {
        let d = mu.len();
        let n = self.order();
        let mut idx = vec![0usize; d];
        let mut acc: Vec<f64> = Vec::new();
        let mut z = vec![0.0; d];
        loop {
            let mut w = 1.0;
            for (j, &k) in idx.iter().enumerate() {
                z[j] = self.nodes[k];
                w *= self.weights[k];
            }
            let noise = root.matvec(&z);
            let a: Vec<f64> = mu.iter().zip(&noise).map(|(m, n)| m + n).collect();
            let v = f(&a, &z);
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            for (s, x) in acc.iter_mut().zip(&v) {
                *s += w * x;
            }
            let mut j = 0;
            loop {
                if j == d {
                    return acc;
                }
                idx[j] += 1;
                if idx[j] < n {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }
}

/// Sample mean and standard error (per component) of `f(a, z)`, `a = μ + root z`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub samples: usize,
}

impl MonteCarloEstimate {
    /// Whether `x` lies within `z` standard errors of the estimate in every component.
    pub fn contains(&self, x: &[f64], z: f64) -> bool {
        self.mean
            .iter()
            .zip(&self.std_error)
            .zip(x)
            .all(|((m, se), v)| (m - v).abs() <= z * se + 1e-300)
    }
}

pub fn monte_carlo_expect<F, R>(
    mu: &[f64],
    root: &SymmetricMatrix,
    samples: usize,
    rng: &mut R,
    mut f: F,
) -> MonteCarloEstimate
where
    F: FnMut(&[f64], &[f64]) -> Vec<f64>,
    R: Rng + ?Sized,
{
    let d = mu.len();
    let mut sum: Vec<f64> = Vec::new();
    let mut sum_sq: Vec<f64> = Vec::new();
    let mut z = vec![0.0; d];
    for _ in 0..samples {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let noise = root.matvec(&z);
        let a: Vec<f64> = mu.iter().zip(&noise).map(|(m, n)| m + n).collect();
        let v = f(&a, &z);
        if sum.is_empty() {
            sum = vec![0.0; v.len()];
            sum_sq = vec![0.0; v.len()];
        }
        for ((s, q), x) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(&v) {
            *s += x;
            *q += x * x;
        }
    }
    let n = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error = sum_sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| {
            let var = ((q / n - m * m) * n / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    MonteCarloEstimate { mean, std_error, samples }
}
