//! Expected policy gradients for Gaussian policies with quadric critics,
//! Hessian-driven exploration, SPG/DPG baselines, and exact oracles.

pub mod critic;
pub mod env;
pub mod error;
pub mod features;
pub mod gradient;
pub mod linalg;
pub mod mdp;
pub mod policy;
pub mod quadrature;

pub use error::{Error, Result};
pub use features::PolynomialFeatures;
pub use linalg::SymmetricMatrix;
pub mod verification;
