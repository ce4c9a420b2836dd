//! Sparse test signals.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed;

/// An ambient vector together with the support it was drawn on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    pub values: Vec<f64>,
    pub support: Vec<usize>,
}

impl SparseSignal {
    /// `k` standard-normal nonzeros on a support drawn uniformly without
    /// replacement from the first `support_range` coordinates of `R^n`.
    pub fn random(n: usize, k: usize, support_range: usize, seed: u64) -> Result<Self> {
        let range = support_range.min(n);
        if k > range {
            return invalid(format!("cannot place {k} nonzeros in {range} coordinates"));
        }
        let mut rng = seed::rng(seed);
        let mut support = seed::sample_without_replacement(&mut rng, range, k);
        support.sort_unstable();
        let mut values = vec![0.0; n];
        for &j in &support {
            values[j] = StandardNormal.sample(&mut rng);
        }
        Ok(Self { values, support })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            support: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sparsity(&self) -> usize {
        self.values.iter().filter(|x| **x != 0.0).count()
    }

    /// Zero-pads the signal to dimension `n`.
    pub fn embed(&self, n: usize) -> Result<Self> {
        if n < self.values.len() {
            return invalid("embedding dimension smaller than signal");
        }
        let mut values = self.values.clone();
        values.resize(n, 0.0);
        Ok(Self {
            values,
            support: self.support.clone(),
        })
    }
}

/// Best `k`-term approximation error in the l1 norm.
pub fn best_k_term_error(x: &[f64], k: usize) -> f64 {
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    mags.iter().skip(k).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_signal_is_sparse_and_deterministic() {
        let a = SparseSignal::random(200, 5, 200, 9).unwrap();
        let b = SparseSignal::random(200, 5, 200, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sparsity(), 5);
        assert_eq!(best_k_term_error(&a.values, 5), 0.0);
        let c = SparseSignal::random(1000, 4, 10, 1).unwrap();
        assert!(c.support.iter().all(|&j| j < 10));
        assert!(SparseSignal::random(10, 11, 10, 0).is_err());
    }

    #[test]
    fn sigma_k() {
        assert_eq!(best_k_term_error(&[3.0, -1.0, 0.5, -2.0], 2), 1.5);
        assert_eq!(best_k_term_error(&[1.0], 0), 1.0);
    }
}
