use serde::{Deserialize, Serialize};

/// Second-order polynomial state features: `[1, s_i, s_i s_j (i <= j)]`.
///
/// Shared by the policy mean map and every critic coefficient map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolynomialFeatures {
    pub state_dim: usize,
}

impl PolynomialFeatures {
    pub fn new(state_dim: usize) -> Self {
        Self { state_dim }
    }

    pub fn len(&self) -> usize {
        let n = self.state_dim;
        1 + n + n * (n + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval(&self, s: &[f64]) -> Vec<f64> {
        debug_assert_eq!(s.len(), self.state_dim);
        let mut phi = Vec::with_capacity(self.len());
        phi.push(1.0);
        phi.extend_from_slice(s);
        for i in 0..s.len() {
            for j in i..s.len() {
                phi.push(s[i] * s[j]);
            }
        }
        phi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let f = PolynomialFeatures::new(2);
        assert_eq!(f.len(), 6);
        assert_eq!(f.eval(&[2.0, 3.0]), vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);
        assert_eq!(PolynomialFeatures::new(4).len(), 15);
    }
}
