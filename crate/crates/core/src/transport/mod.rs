//! Exact discrete optimal transport.
//!
//! * [`wasserstein1`] solves the primal transport problem with a
//!   transportation simplex and returns an optimal [`Coupling`].
//! * [`kantorovich_dual_value`] solves the Kantorovich–Rubinstein dual as a
//!   dense linear program over 1-Lipschitz potentials. The two routes share
//!   no code and are checked against each other in the tests.
//! * [`optimal_permutation`] matches two equal-size point families.
//! * [`estimate_mn`] estimates the mean Wasserstein deviation of an
//!   empirical measure from its law.

mod assignment;
mod network;
mod rate;

pub use assignment::{hungarian, optimal_permutation, optimal_permutation_with, PermutationMethod, PermutationResult};
pub use rate::{
    default_candidates, estimate_mn, exact_mn, expected_empirical_w1, expected_empirical_w1_exact, sample_empirical_counts,
    MnEstimate,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp;
use crate::measure::Measure;
use crate::space::Metric;

/// A transport plan between two measures on the same space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub source: Measure,
    pub target: Measure,
    /// `plan[i][j]`: mass moved from point `i` to point `j`.
    pub plan: Vec<Vec<f64>>,
}

impl Coupling {
    pub fn cost(&self, space: &impl Metric) -> f64 {
        self.plan
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, p)| p * space.dist(i, j)).sum::<f64>())
            .sum()
    }

    /// Largest deviation of the plan's marginals from source and target.
    pub fn marginal_error(&self) -> f64 {
        let n = self.plan.len();
        let mut err = 0.0f64;
        for i in 0..n {
            let row: f64 = self.plan[i].iter().sum();
            let col: f64 = (0..n).map(|k| self.plan[k][i]).sum();
            err = err.max((row - self.source[i]).abs()).max((col - self.target[i]).abs());
        }
        err
    }
}

fn check_pair(space: &impl Metric, mu: &Measure, nu: &Measure) -> Result<()> {
    let n = space.size();
    if mu.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: mu.len() });
    }
    if nu.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: nu.len() });
    }
    Ok(())
}

/// Empirical measure `(1/N) Σ δ_{p_i}` of a list of point indices.
pub fn empirical_measure(points: &[usize], size: usize) -> Result<Measure> {
    if points.is_empty() {
        return Err(Error::Domain("empirical measure of an empty family".into()));
    }
    let mut counts = vec![0usize; size];
    for &p in points {
        if p >= size {
            return Err(Error::IndexOutOfRange { index: p, size });
        }
        counts[p] += 1;
    }
    Ok(Measure::from_counts(&counts))
}

/// Exact `W_1(mu, nu)` together with an optimal coupling.
pub fn wasserstein1(space: &impl Metric, mu: &Measure, nu: &Measure) -> Result<(f64, Coupling)> {
    check_pair(space, mu, nu)?;
    let n = space.size();
    let src: Vec<usize> = mu.support().collect();
    let dst: Vec<usize> = nu.support().collect();
    let supply: Vec<f64> = src.iter().map(|&i| mu[i]).collect();
    let demand: Vec<f64> = dst.iter().map(|&j| nu[j]).collect();
    let (cost, sub) = network::solve(&supply, &demand, &|i, j| space.dist(src[i], dst[j]));
    let mut plan = vec![vec![0.0; n]; n];
    for (a, &i) in src.iter().enumerate() {
        for (b, &j) in dst.iter().enumerate() {
            plan[i][j] = sub[a][b];
        }
    }
    Ok((cost.max(0.0), Coupling { source: mu.clone(), target: nu.clone(), plan }))
}

/// `W_1(mu, nu)` without the coupling. Closed forms are used where the metric
/// allows (two points, or all off-diagonal distances equal); otherwise this is
/// the transportation simplex of [`wasserstein1`].
pub fn w1_distance(space: &impl Metric, mu: &Measure, nu: &Measure) -> f64 {
    let n = space.size();
    debug_assert_eq!(mu.len(), n);
    if n == 1 {
        return 0.0;
    }
    if n == 2 {
        return space.dist(0, 1) * (mu[0] - nu[0]).abs();
    }
    if let Some(c) = space.uniform_distance() {
        return c * mu.total_variation(nu);
    }
    wasserstein1(space, mu, nu).map(|(c, _)| c).unwrap_or(f64::NAN)
}

/// Potentials attaining the dual value.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub value: f64,
    pub potential: Vec<f64>,
}

/// `max_φ ∫ φ d(mu - nu)` over potentials with `|φ(y) - φ(y')| <= d(y, y')`,
/// solved as a linear program.
pub fn kantorovich_dual_value(space: &impl Metric, mu: &Measure, nu: &Measure) -> Result<f64> {
    kantorovich_dual(space, mu, nu).map(|d| d.value)
}

pub fn kantorovich_dual(space: &impl Metric, mu: &Measure, nu: &Measure) -> Result<DualSolution> {
    check_pair(space, mu, nu)?;
    let n = space.size();
    // Variables ψ_i = φ_i - φ_0 + Δ >= 0; capping ψ_0 at Δ removes the
    // free additive constant without cutting off any optimal potential.
    let c: Vec<f64> = (0..n).map(|i| mu[i] - nu[i]).collect();
    let mut a = Vec::with_capacity(n * n);
    let mut b = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                row[j] = -1.0;
                a.push(row);
                b.push(space.dist(i, j));
            }
        }
    }
    let mut pin = vec![0.0; n];
    pin[0] = 1.0;
    a.push(pin);
    b.push(space.diameter());
    let sol = lp::maximize(&c, &a, &b)?;
    Ok(DualSolution { value: sol.value, potential: sol.x })
}
