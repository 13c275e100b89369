use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::compose;
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::space::{FiniteMetricSpace, Metric};
use crate::transport::w1_distance;

/// Largest grid this crate will build.
pub const MAX_GRID_NODES: u128 = 2_000_000;
const TIE_TOL: f64 = 1e-12;

/// All measures on `n_states` points with weights `k_i / q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexGrid {
    n_states: usize,
    q: usize,
    nodes: Vec<Vec<usize>>,
    #[serde(skip)]
    index: HashMap<Vec<usize>, usize>,
}

impl SimplexGrid {
    pub fn new(n_states: usize, q: usize) -> Result<Self> {
        if n_states == 0 || q == 0 {
            return Err(Error::Domain("grid needs at least one state and q >= 1".into()));
        }
        let count = compose::composition_count(q, n_states);
        if count > MAX_GRID_NODES {
            return Err(Error::cap("simplex grid nodes", count, MAX_GRID_NODES));
        }
        let nodes = compose::compositions(q, n_states);
        let index = nodes.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Ok(Self { n_states, q, nodes, index })
    }

    pub fn denominator(&self) -> usize {
        self.q
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn counts(&self, node: usize) -> &[usize] {
        &self.nodes[node]
    }

    pub fn measure(&self, node: usize) -> Measure {
        Measure::from_counts(&self.nodes[node])
    }

    pub fn node_of_counts(&self, counts: &[usize]) -> Option<usize> {
        if self.index.is_empty() {
            return self.nodes.iter().position(|c| c == counts);
        }
        self.index.get(counts).copied()
    }

    /// Exact node if `mu` lies on the grid (within 1e-12 per weight).
    pub fn exact_node(&self, mu: &Measure) -> Option<usize> {
        let counts: Vec<usize> = mu.weights().iter().map(|w| (w * self.q as f64).round() as usize).collect();
        if counts.iter().sum::<usize>() != self.q {
            return None;
        }
        let close = counts
            .iter()
            .zip(mu.weights())
            .all(|(&c, &w)| (c as f64 / self.q as f64 - w).abs() <= 1e-12);
        if close {
            self.node_of_counts(&counts)
        } else {
            None
        }
    }

    /// Node closest to `mu` in `W_d`; ties go to the smallest node index.
    pub fn nearest(&self, space: &FiniteMetricSpace, mu: &Measure) -> usize {
        if let Some(node) = self.exact_node(mu) {
            // an exact hit is at distance zero; only an earlier node at
            // distance zero could tie, which is impossible for distinct nodes
            return node;
        }
        if self.n_states == 2 {
            // W is |μ_1 - k/q| · d(0,1); only the two roundings of q μ_1 compete.
            // Node index equals k_1 in the enumeration order.
            let t = mu[1] * self.q as f64;
            let lo = (t.floor().max(0.0) as usize).min(self.q);
            let hi = (lo + 1).min(self.q);
            let d = |k: usize| w1_distance(space, mu, &self.measure(k));
            let (dl, dh) = (d(lo), d(hi));
            return if dl <= dh + TIE_TOL { lo } else { hi };
        }
        let dists: Vec<f64> = (0..self.len()).map(|i| w1_distance(space, mu, &self.measure(i))).collect();
        let best = dists.iter().cloned().fold(f64::INFINITY, f64::min);
        dists.iter().position(|&d| d <= best + TIE_TOL).expect("grid is nonempty")
    }

    /// Worst-case nearest-node distance guaranteed by the mesh.
    pub fn mesh_bound(&self, space: &FiniteMetricSpace) -> f64 {
        space.diameter() * self.n_states as f64 / (2.0 * self.q as f64)
    }

    /// Grid nodes and weights of the Freudenthal simplex containing `mu`.
    pub fn barycentric(&self, mu: &Measure) -> Vec<(usize, f64)> {
        let n = self.n_states;
        if n == 1 {
            return vec![(0, 1.0)];
        }
        let q = self.q as f64;
        // cumulative tail coordinates s_k = q Σ_{i >= k} μ_i, k = 1..n-1
        let mut s = vec![0.0; n - 1];
        let mut tail = 0.0;
        for k in (1..n).rev() {
            tail += mu[k];
            s[k - 1] = (tail * q).clamp(0.0, q);
        }
        let base: Vec<i64> = s.iter().map(|v| v.floor() as i64).collect();
        let frac: Vec<f64> = s.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
        let mut order: Vec<usize> = (0..n - 1).collect();
        order.sort_by(|&a, &b| frac[b].partial_cmp(&frac[a]).unwrap().then(a.cmp(&b)));
        let mut vertex = base.clone();
        let mut out = Vec::with_capacity(n);
        let first_w = 1.0 - frac[order[0]];
        self.push_vertex(&vertex, first_w, &mut out);
        for (j, &k) in order.iter().enumerate() {
            vertex[k] += 1;
            let next = order.get(j + 1).map(|&m| frac[m]).unwrap_or(0.0);
            self.push_vertex(&vertex, frac[k] - next, &mut out);
        }
        out
    }

    fn push_vertex(&self, s: &[i64], weight: f64, out: &mut Vec<(usize, f64)>) {
        if weight <= 0.0 {
            return;
        }
        let n = self.n_states;
        let q = self.q as i64;
        let mut counts = vec![0usize; n];
        counts[0] = (q - s[0]) as usize;
        for k in 1..n - 1 {
            counts[k] = (s[k - 1] - s[k]) as usize;
        }
        counts[n - 1] = s[n - 2] as usize;
        let node = self.node_of_counts(&counts).expect("Freudenthal vertex lies on the grid");
        out.push((node, weight));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_count_matches_binomial() {
        for (n, q) in [(2, 50), (3, 10), (4, 6)] {
            let g = SimplexGrid::new(n, q).unwrap();
            assert_eq!(g.len() as u128, compose::composition_count(q, n));
        }
    }

    #[test]
    fn nearest_breaks_ties_by_index() {
        let g = SimplexGrid::new(2, 2).unwrap();
        let s = FiniteMetricSpace::discrete(2);
        // 0.25 is equidistant from (1,0)/(1/2,1/2); node order is (2,0),(1,1),(0,2)
        let mu = Measure::new(vec![0.75, 0.25]).unwrap();
        assert_eq!(g.nearest(&s, &mu), 0);
        let mu = Measure::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(g.nearest(&s, &mu), 1);
    }

    #[test]
    fn barycentric_reproduces_measure() {
        let g = SimplexGrid::new(3, 4).unwrap();
        let mu = Measure::new(vec![0.13, 0.52, 0.35]).unwrap();
        let bc = g.barycentric(&mu);
        let total: f64 = bc.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mut rec = [0.0; 3];
        for (node, w) in &bc {
            for (r, m) in rec.iter_mut().zip(g.measure(*node).weights()) {
                *r += w * m;
            }
        }
        for (r, m) in rec.iter().zip(mu.weights()) {
            assert!((r - m).abs() < 1e-12);
        }
    }
}
