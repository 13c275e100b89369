//! Finite metric spaces: the state space, the action space and their product.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite set of points with a distance between every pair.
pub trait Metric {
    fn size(&self) -> usize;
    fn dist(&self, i: usize, j: usize) -> f64;
    fn diameter(&self) -> f64;

    /// Every off-diagonal distance equals the same constant.
    fn uniform_distance(&self) -> Option<f64> {
        let n = self.size();
        if n < 2 {
            return Some(0.0);
        }
        let c = self.dist(0, 1);
        for i in 0..n {
            for j in 0..n {
                if i != j && self.dist(i, j) != c {
                    return None;
                }
            }
        }
        Some(c)
    }
}

/// Indexed point set with a validated distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    dist: Vec<Vec<f64>>,
    diameter: f64,
}

impl FiniteMetricSpace {
    /// Builds a space, checking symmetry, a zero diagonal, positivity off the
    /// diagonal and the triangle inequality over every triple.
    pub fn new(labels: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidSpace("space must have at least one point".into()));
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidSpace(format!("distance matrix must be {n}x{n}")));
        }
        let mut diameter = 0.0f64;
        for i in 0..n {
            if dist[i][i] != 0.0 {
                return Err(Error::InvalidSpace(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let d = dist[i][j];
                if !d.is_finite() {
                    return Err(Error::InvalidSpace(format!("non-finite distance at ({i},{j})")));
                }
                if d != dist[j][i] {
                    return Err(Error::InvalidSpace(format!("asymmetric at ({i},{j})")));
                }
                if i != j && d <= 0.0 {
                    return Err(Error::InvalidSpace(format!("non-positive distance at ({i},{j})")));
                }
                diameter = diameter.max(d);
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if dist[i][k] > dist[i][j] + dist[j][k] + 1e-12 {
                        return Err(Error::InvalidSpace(format!(
                            "triangle inequality fails for ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(Self { labels, dist, diameter })
    }

    /// `n` points at mutual distance one.
    pub fn discrete(n: usize) -> Self {
        let labels = (0..n).map(|i| i.to_string()).collect();
        let dist = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        Self::new(labels, dist).expect("discrete metric is valid")
    }

    /// Points `0..n` on a line with `d(i, j) = |i - j|`.
    pub fn line(n: usize) -> Self {
        let labels = (0..n).map(|i| i.to_string()).collect();
        let dist = (0..n)
            .map(|i| (0..n).map(|j| (i as f64 - j as f64).abs()).collect())
            .collect();
        Self::new(labels, dist).expect("line metric is valid")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.dist
    }

    /// Every pair of distinct points at the same distance.
    pub fn is_uniform(&self) -> bool {
        let n = self.labels.len();
        let d0 = if n > 1 { self.dist[0][1] } else { 0.0 };
        (0..n).all(|i| (0..n).all(|j| i == j || self.dist[i][j] == d0))
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.labels.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index, size: self.labels.len() })
        }
    }
}

impl Metric for FiniteMetricSpace {
    fn size(&self) -> usize {
        self.labels.len()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i][j]
    }

    fn diameter(&self) -> f64 {
        self.diameter
    }
}

/// `X × A` with the sum metric. Point `(x, a)` has flat index `x * |A| + a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSpace {
    left: FiniteMetricSpace,
    right: FiniteMetricSpace,
}

impl ProductSpace {
    pub fn new(left: FiniteMetricSpace, right: FiniteMetricSpace) -> Self {
        Self { left, right }
    }

    pub fn left(&self) -> &FiniteMetricSpace {
        &self.left
    }

    pub fn right(&self) -> &FiniteMetricSpace {
        &self.right
    }

    #[inline]
    pub fn index(&self, x: usize, a: usize) -> usize {
        x * self.right.size() + a
    }

    #[inline]
    pub fn split(&self, flat: usize) -> (usize, usize) {
        (flat / self.right.size(), flat % self.right.size())
    }
}

impl Metric for ProductSpace {
    fn size(&self) -> usize {
        self.left.size() * self.right.size()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        let (x, a) = self.split(i);
        let (y, b) = self.split(j);
        self.left.dist(x, y) + self.right.dist(a, b)
    }

    fn diameter(&self) -> f64 {
        self.left.diameter() + self.right.diameter()
    }
}
