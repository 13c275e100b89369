use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Metric;

/// `sigma[i]` is the index in `y'` matched to `y[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub sigma: Vec<usize>,
    /// `(1/N) Σ_i d(y_i, y'_{σ_i})`.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationMethod {
    /// Enumeration up to [`EXHAUSTIVE_MAX`] points, assignment beyond.
    Auto,
    Exhaustive,
    Assignment,
}

pub const EXHAUSTIVE_MAX: usize = 8;
const TIE_TOL: f64 = 1e-12;

/// Optimal matching of two point families of equal length.
///
/// Among all cost-minimising permutations, returns the lexicographically
/// smallest in one-line notation, so the result is a deterministic function
/// of the inputs.
pub fn optimal_permutation(space: &impl Metric, y: &[usize], y_prime: &[usize]) -> Result<PermutationResult> {
    optimal_permutation_with(space, y, y_prime, PermutationMethod::Auto)
}

pub fn optimal_permutation_with(
    space: &impl Metric,
    y: &[usize],
    y_prime: &[usize],
    method: PermutationMethod,
) -> Result<PermutationResult> {
    if y.len() != y_prime.len() {
        return Err(Error::LengthMismatch { expected: y.len(), got: y_prime.len() });
    }
    if y.is_empty() {
        return Err(Error::Domain("empty point families".into()));
    }
    for &p in y.iter().chain(y_prime) {
        if p >= space.size() {
            return Err(Error::IndexOutOfRange { index: p, size: space.size() });
        }
    }
    let n = y.len();
    let cost: Vec<Vec<f64>> = y.iter().map(|&a| y_prime.iter().map(|&b| space.dist(a, b)).collect()).collect();
    let exhaustive = match method {
        PermutationMethod::Auto => n <= EXHAUSTIVE_MAX,
        PermutationMethod::Exhaustive => true,
        PermutationMethod::Assignment => false,
    };
    let sigma = if exhaustive { enumerate(&cost) } else { lexicographic_assignment(&cost) };
    let total: f64 = sigma.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok(PermutationResult { sigma, cost: total / n as f64 })
}

fn enumerate(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = f64::INFINITY;
    loop {
        let c: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        if c < best_cost - TIE_TOL * (1.0 + best_cost.abs().min(1e300)) {
            best_cost = c;
            best.clone_from(&perm);
        }
        if !next_permutation(&mut perm) {
            return best;
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Fix rows in order, each to the smallest column that keeps the total
/// optimal; the completion cost is re-solved with [`hungarian`].
fn lexicographic_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let (opt, _) = hungarian(cost);
    let tol = TIE_TOL * (1.0 + opt.abs()) * n as f64;
    let mut used = vec![false; n];
    let mut fixed_cost = 0.0;
    let mut sigma = Vec::with_capacity(n);
    for i in 0..n {
        let mut chosen = None;
        for j in 0..n {
            if used[j] {
                continue;
            }
            let rows: Vec<usize> = (i + 1..n).collect();
            let cols: Vec<usize> = (0..n).filter(|&k| !used[k] && k != j).collect();
            let sub: Vec<Vec<f64>> = rows.iter().map(|&r| cols.iter().map(|&c| cost[r][c]).collect()).collect();
            let rest = if sub.is_empty() { 0.0 } else { hungarian(&sub).0 };
            if fixed_cost + cost[i][j] + rest <= opt + tol {
                chosen = Some(j);
                break;
            }
        }
        let j = chosen.expect("some column completes an optimal assignment");
        used[j] = true;
        fixed_cost += cost[i][j];
        sigma.push(j);
    }
    sigma
}

/// Minimum-cost perfect matching on a square matrix (shortest augmenting
/// paths with potentials, `O(n^3)`). Returns the cost and `row -> column`.
pub fn hungarian(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = cost.len();
    if n == 0 {
        return (0.0, vec![]);
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    let total = assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (total, assign)
}
