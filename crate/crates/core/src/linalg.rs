//! Small dense symmetric linear algebra.
//!
//! Everything here targets action-space matrices (dimension at most 8):
//! exploration covariance roots, critic curvature blocks and Hessians.
//! The eigensolver is cyclic Jacobi; matrix functions (`sym_exp`,
//! `sym_sqrt`) are applied through the eigendecomposition, so they are
//! basis-invariant within degenerate eigenspaces.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const PSD_TOL: f64 = 1e-10;

/// Default clipping interval for `scale * eigenvalue` inside [`sym_exp`].
pub const EXP_GUARD: ExpGuard = ExpGuard { lo: -30.0, hi: 6.0 };

/// A `d x d` real symmetric matrix stored row-major.
///
/// Symmetry is exact: construction averages the two triangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymmetricMatrixRepr", into = "SymmetricMatrixRepr")]
pub struct SymmetricMatrix {
    dim: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SymmetricMatrixRepr {
    dim: usize,
    entries: Vec<f64>,
}

impl TryFrom<SymmetricMatrixRepr> for SymmetricMatrix {
    type Error = Error;
    fn try_from(r: SymmetricMatrixRepr) -> Result<Self> {
        SymmetricMatrix::new(r.dim, r.entries)
    }
}

impl From<SymmetricMatrix> for SymmetricMatrixRepr {
    fn from(m: SymmetricMatrix) -> Self {
        SymmetricMatrixRepr { dim: m.dim, entries: m.entries }
    }
}

impl SymmetricMatrix {
    /// Builds a matrix from `dim * dim` row-major entries, symmetrizing by averaging.
    pub fn new(dim: usize, mut entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("matrix dimension must be at least 1"));
        }
        if entries.len() != dim * dim {
            return Err(invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (entries[i * dim + j] + entries[j * dim + i]);
                entries[i * dim + j] = avg;
                entries[j * dim + i] = avg;
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self::new(dim, entries)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(invalid("rows must form a square matrix"));
        }
        Self::new(dim, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Self { dim, entries: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, value: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = value;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.entries[i * values.len() + i] = v;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set_sym(&mut self, i: usize, j: usize, value: f64) {
        self.entries[i * self.dim + j] = value;
        self.entries[j * self.dim + i] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim)?;
        Ok(Self {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    /// `self += s * other`, in place.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += s * b;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| dot(&self.entries[i * self.dim..(i + 1) * self.dim], x))
            .collect()
    }

    /// `xᵀ M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    /// Plain (generally non-symmetric) product, row-major.
    pub fn matmul(&self, other: &Self) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                for j in 0..d {
                    out[i * d + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Outer product `x xᵀ`.
    pub fn outer(x: &[f64]) -> Self {
        let d = x.len();
        let mut m = Self::zeros(d.max(1));
        for i in 0..d {
            for j in 0..d {
                m.entries[i * d + j] = x[i] * x[j];
            }
        }
        m
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    /// Symmetrizes a square dense matrix by averaging its triangles.
    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(invalid("matrix is not square"));
        }
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim != d {
            return Err(invalid(format!("dimension mismatch: {} vs {d}", self.dim)));
        }
        Ok(())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal eigendecomposition `M = U diag(Λ) Uᵀ`, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Row-major `d x d`; column `j` is the eigenvector for `eigenvalues[j]`.
    pub eigenvectors: Vec<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `U diag(f(λ)) Uᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let d = self.dim();
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let u = &self.eigenvectors;
        let mut out = SymmetricMatrix::zeros(d);
        for i in 0..d {
            for j in i..d {
                let v: f64 = (0..d).map(|k| u[i * d + k] * fl[k] * u[j * d + k]).sum();
                out.set_sym(i, j, v);
            }
        }
        out
    }

    pub fn reconstruct(&self) -> SymmetricMatrix {
        self.map(|l| l)
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(m: &SymmetricMatrix) -> Result<EigenDecomposition> {
    if !m.is_finite() {
        return Err(invalid("matrix has non-finite entries"));
    }
    let n = m.dim();
    let mut a = m.as_slice().to_vec();
    let mut v = SymmetricMatrix::identity(n).entries;
    let scale = m.frobenius_norm();

    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = scale == 0.0 || off(&a) <= JACOBI_TOL * scale;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        converged = off(&a) <= JACOBI_TOL * scale;
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let eigenvalues = order.iter().map(|&i| a[i * n + i]).collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            eigenvectors[r * n + new_col] = v[r * n + old_col];
        }
    }
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

/// Clipping interval for exponents in [`sym_exp_with_guard`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpGuard {
    pub lo: f64,
    pub hi: f64,
}

impl ExpGuard {
    pub const NONE: ExpGuard = ExpGuard { lo: f64::NEG_INFINITY, hi: f64::INFINITY };
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpOutput {
    pub matrix: SymmetricMatrix,
    /// Set when at least one `scale * λ` fell outside the guard and was clipped.
    pub clipped: bool,
    /// Eigenvalues of the result, ascending.
    pub eigenvalues: Vec<f64>,
}

/// `U exp(scale Λ) Uᵀ` with exponents clipped to [`EXP_GUARD`].
pub fn sym_exp(m: &SymmetricMatrix, scale: f64) -> Result<ExpOutput> {
    sym_exp_with_guard(m, scale, EXP_GUARD)
}

pub fn sym_exp_with_guard(m: &SymmetricMatrix, scale: f64, guard: ExpGuard) -> Result<ExpOutput> {
    if !scale.is_finite() {
        return Err(invalid("exponent scale must be finite"));
    }
    let eig = sym_eig(m)?;
    let mut clipped = false;
    let exponents: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| {
            let x = scale * l;
            if x < guard.lo || x > guard.hi {
                clipped = true;
            }
            x.clamp(guard.lo, guard.hi)
        })
        .collect();
    let d = eig.dim();
    let u = &eig.eigenvectors;
    let mut matrix = SymmetricMatrix::zeros(d);
    for i in 0..d {
        for j in i..d {
            let v: f64 = (0..d).map(|k| u[i * d + k] * exponents[k].exp() * u[j * d + k]).sum();
            matrix.set_sym(i, j, v);
        }
    }
    let mut eigenvalues: Vec<f64> = exponents.iter().map(|x| x.exp()).collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(ExpOutput { matrix, clipped, eigenvalues })
}

/// Principal square root of a PSD matrix. Eigenvalues in `[-1e-10, 0)` are clamped to zero.
pub fn sym_sqrt(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = sym_eig(m)?;
    let min = eig.min_eigenvalue();
    if min < -PSD_TOL {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(eig.map(|l| l.max(0.0).sqrt()))
}

/// `E[aᵀ A a + bᵀ a]` for `a ~ N(μ, Σ)`, i.e. `tr(AΣ) + μᵀAμ + bᵀμ`.
pub fn gaussian_quadric_expectation(
    a: &SymmetricMatrix,
    b: &[f64],
    mu: &[f64],
    sigma: &SymmetricMatrix,
) -> Result<f64> {
    let d = a.dim();
    if b.len() != d || mu.len() != d || sigma.dim() != d {
        return Err(invalid(format!(
            "dimension mismatch: A is {d}x{d}, b has {}, mu has {}, Sigma is {}x{}",
            b.len(),
            mu.len(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    let trace_term: f64 = dot(a.as_slice(), sigma.as_slice());
    Ok(trace_term + a.quad_form(mu) + dot(b, mu))
}
