#![allow(dead_code)]

use std::sync::Arc;

use mfchaos::cmkv::{value_iteration, KernelFamily, MeanFieldSolution, SimplexGrid};
use mfchaos::config::Config;
use mfchaos::model::InfluenceThreshold;
use mfchaos::{FiniteMetricSpace, Measure, Metric, ModelParts, ModelSpec, NoiseSpec, RewardRule, TransitionRule};
use rand::Rng;

pub fn reference() -> ModelSpec {
    Config::reference().model.build().unwrap()
}

pub fn reference_solution() -> MeanFieldSolution {
    let m = reference();
    let grid = Arc::new(SimplexGrid::new(2, 50).unwrap());
    value_iteration(&m, grid, KernelFamily::Randomized { steps: 8 }, 1e-8).unwrap()
}

pub fn threshold(eta: f64, eta0: f64, levels: Vec<f64>) -> TransitionRule {
    TransitionRule::InfluenceThreshold(InfluenceThreshold { eta, eta0, common_levels: levels })
}

pub fn binary(noise: NoiseSpec, transition: TransitionRule, reward: RewardRule, beta: f64) -> ModelSpec {
    ModelSpec::new(ModelParts {
        states: FiniteMetricSpace::discrete(2),
        actions: FiniteMetricSpace::discrete(2),
        noise,
        transition,
        reward,
        beta,
        k_big_f: 1.0,
        k_f: 1.0,
    })
    .unwrap()
}

/// Influence dynamics with `n_idio` idiosyncratic levels and the given common shifts.
pub fn influence(n_idio: usize, levels: Vec<f64>, reward: RewardRule, beta: f64) -> ModelSpec {
    let n_common = levels.len().max(1);
    binary(NoiseSpec::uniform(n_idio, n_common), threshold(0.3, 0.1, levels), reward, beta)
}

pub fn linear_cost() -> RewardRule {
    RewardRule::Linear { state_coef: 1.0, action_coef: -0.2 }
}

pub fn constant_reward(c: f64, beta: f64) -> ModelSpec {
    binary(NoiseSpec::uniform(4, 2), threshold(0.3, 0.1, vec![-1.0, 1.0]), RewardRule::Constant { value: c }, beta)
}

/// Close a fresh `tol` around a measured quantity.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn m(w: &[f64]) -> Measure {
    Measure::new(w.to_vec()).unwrap()
}

pub fn random_measure<R: Rng>(n: usize, r: &mut R) -> Measure {
    // sparse supports exercise degenerate transport bases
    let w: Vec<f64> = (0..n).map(|_| if r.random::<f64>() < 0.25 { 0.0 } else { r.random::<f64>() }).collect();
    let s: f64 = w.iter().sum();
    if s == 0.0 {
        return Measure::point_mass(n, 0);
    }
    Measure::new(w.iter().map(|v| v / s).collect()).unwrap()
}

pub fn random_metric<R: Rng>(n: usize, r: &mut R) -> FiniteMetricSpace {
    // shortest paths over random positive weights give a metric
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = 0.1 + r.random::<f64>() * 2.0;
            d[i][j] = w;
            d[j][i] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    FiniteMetricSpace::new((0..n).map(|i| i.to_string()).collect(), d).unwrap()
}

/// All permutations of `0..n` in lexicographic one-line order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 0..n {
        for rest in permutations(n - 1) {
            let mut p = vec![first];
            p.extend(rest.into_iter().map(|v| if v >= first { v + 1 } else { v }));
            out.push(p);
        }
    }
    out
}

pub fn brute_force_matching(space: &impl Metric, y: &[usize], yp: &[usize]) -> (Vec<usize>, f64) {
    let n = y.len();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for p in permutations(n) {
        let c: f64 = p.iter().enumerate().map(|(i, &j)| space.dist(y[i], yp[j])).sum::<f64>() / n as f64;
        if best.as_ref().is_none_or(|(_, b)| c < b - 1e-12) {
            best = Some((p, c));
        }
    }
    best.unwrap()
}
