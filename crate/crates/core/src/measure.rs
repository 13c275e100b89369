//! Probability vectors over finite spaces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::ProductSpace;

/// Allowed deviation of the total mass from one.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Probability mass per point of a finite space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Measure {
    weights: Vec<f64>,
}

impl Measure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("empty weight vector".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("weight {i} is {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        Ok(Self { weights })
    }

    /// Skips validation; callers guarantee the simplex invariant.
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        Self { weights }
    }

    pub fn point_mass(size: usize, at: usize) -> Self {
        let mut w = vec![0.0; size];
        w[at] = 1.0;
        Self { weights: w }
    }

    pub fn uniform(size: usize) -> Self {
        Self { weights: vec![1.0 / size as f64; size] }
    }

    /// Weight `counts[i] / total` on point `i`.
    pub fn from_counts(counts: &[usize]) -> Self {
        let total: usize = counts.iter().sum();
        assert!(total > 0, "counts must not all be zero");
        let t = total as f64;
        Self { weights: counts.iter().map(|&c| c as f64 / t).collect() }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, _)| i)
    }

    /// Marginal on the left factor of a product space.
    pub fn left_marginal(&self, space: &ProductSpace) -> Measure {
        use crate::space::Metric;
        let na = space.right().size();
        let nx = space.left().size();
        let w = (0..nx).map(|x| self.weights[x * na..(x + 1) * na].iter().sum()).collect();
        Measure { weights: w }
    }

    /// Sum of absolute differences, halved.
    pub fn total_variation(&self, other: &Measure) -> f64 {
        0.5 * self.weights.iter().zip(&other.weights).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// Mixture `(1 - t) * self + t * other`.
    pub fn mix(&self, other: &Measure, t: f64) -> Measure {
        Measure {
            weights: self.weights.iter().zip(&other.weights).map(|(a, b)| (1.0 - t) * a + t * b).collect(),
        }
    }
}

impl std::ops::Index<usize> for Measure {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.weights[i]
    }
}
