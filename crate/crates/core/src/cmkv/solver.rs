use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::SimplexGrid;
use super::kernel::{sample_action, ActionKernel, KernelFamily, DEFAULT_KERNEL_CAP};
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::model::ModelSpec;
use crate::rng;
use crate::space::{FiniteMetricSpace, Metric};
use crate::transport::w1_distance;

/// How a [`ValueTable`] is read off the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Value of the closest node in `W_d`.
    #[default]
    Nearest,
    /// Grid nodes only; off-grid queries are an error.
    None,
    /// Piecewise-linear over the Freudenthal triangulation. For plotting;
    /// the solver itself always uses nearest-node lookup.
    Barycentric,
}

/// A function on the simplex, stored at the nodes of a [`SimplexGrid`].
#[derive(Debug, Clone)]
pub struct ValueTable {
    grid: Arc<SimplexGrid>,
    space: FiniteMetricSpace,
    values: Vec<f64>,
    interpolation: Interpolation,
}

impl ValueTable {
    pub fn new(grid: Arc<SimplexGrid>, space: FiniteMetricSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if space.size() != grid.n_states() {
            return Err(Error::LengthMismatch { expected: grid.n_states(), got: space.size() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite table value {v}")));
        }
        Ok(Self { grid, space, values, interpolation: Interpolation::Nearest })
    }

    pub fn constant(grid: Arc<SimplexGrid>, space: FiniteMetricSpace, c: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, space, vec![c; n])
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn grid(&self) -> &Arc<SimplexGrid> {
        &self.grid
    }

    pub fn space(&self) -> &FiniteMetricSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Nodes and weights whose combination gives the value at `mu`.
    pub fn stencil(&self, mu: &Measure) -> Result<Vec<(usize, f64)>> {
        if mu.len() != self.grid.n_states() {
            return Err(Error::LengthMismatch { expected: self.grid.n_states(), got: mu.len() });
        }
        match self.interpolation {
            Interpolation::Nearest => Ok(vec![(self.grid.nearest(&self.space, mu), 1.0)]),
            Interpolation::None => self
                .grid
                .exact_node(mu)
                .map(|n| vec![(n, 1.0)])
                .ok_or_else(|| Error::Domain("measure is not a grid node and interpolation is off".into())),
            Interpolation::Barycentric => Ok(self.grid.barycentric(mu)),
        }
    }

    pub fn evaluate(&self, mu: &Measure) -> Result<f64> {
        Ok(self.stencil(mu)?.iter().map(|&(n, w)| w * self.values[n]).sum())
    }
}

/// Randomized feedback policy: one action kernel per grid node, looked up at
/// the node nearest to the current population law.
#[derive(Debug, Clone)]
pub struct MeanFieldPolicy {
    grid: Arc<SimplexGrid>,
    space: FiniteMetricSpace,
    kernels: Vec<ActionKernel>,
}

impl MeanFieldPolicy {
    pub fn new(grid: Arc<SimplexGrid>, space: FiniteMetricSpace, kernels: Vec<ActionKernel>) -> Result<Self> {
        if kernels.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: kernels.len() });
        }
        if let Some(k) = kernels.iter().find(|k| k.n_states() != grid.n_states()) {
            return Err(Error::LengthMismatch { expected: grid.n_states(), got: k.n_states() });
        }
        Ok(Self { grid, space, kernels })
    }

    /// The same kernel at every node.
    pub fn constant(grid: Arc<SimplexGrid>, space: FiniteMetricSpace, kernel: ActionKernel) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, space, vec![kernel; n])
    }

    pub fn grid(&self) -> &Arc<SimplexGrid> {
        &self.grid
    }

    pub fn space(&self) -> &FiniteMetricSpace {
        &self.space
    }

    pub fn kernels(&self) -> &[ActionKernel] {
        &self.kernels
    }

    pub fn node_kernel(&self, node: usize) -> &ActionKernel {
        &self.kernels[node]
    }

    pub fn kernel_at(&self, mu: &Measure) -> &ActionKernel {
        &self.kernels[self.grid.nearest(&self.space, mu)]
    }

    /// `𝔞(μ, x, u)`.
    pub fn action(&self, mu: &Measure, x: usize, u: f64) -> usize {
        sample_action(self.kernel_at(mu).row(x), u)
    }

    pub fn is_deterministic(&self) -> bool {
        self.kernels.iter().all(|k| k.as_deterministic().is_some())
    }
}

fn check_kernel(model: &ModelSpec, mu: &Measure, kernel: &ActionKernel) -> Result<()> {
    if mu.len() != model.n_states() {
        return Err(Error::LengthMismatch { expected: model.n_states(), got: mu.len() });
    }
    if kernel.n_states() != model.n_states() || kernel.n_actions() != model.n_actions() {
        return Err(Error::LengthMismatch { expected: model.n_states() * model.n_actions(), got: kernel.n_states() * kernel.n_actions() });
    }
    Ok(())
}

/// Law of the next state given the common noise, from the joint law `μ ⊗ κ`.
pub fn next_measure(model: &ModelSpec, mu: &Measure, kernel: &ActionKernel, e0: usize) -> Measure {
    next_measure_from_joint(model, &kernel.joint(mu), e0)
}

pub(crate) fn next_measure_from_joint(model: &ModelSpec, joint: &Measure, e0: usize) -> Measure {
    let n_x = model.n_states();
    let n_a = model.n_actions();
    let mut out = vec![0.0; n_x];
    let mut law = vec![0.0; n_x];
    for x in 0..n_x {
        for a in 0..n_a {
            let w = joint[x * n_a + a];
            if w > 0.0 {
                model.next_state_law(x, a, joint, e0, &mut law);
                for (o, l) in out.iter_mut().zip(&law) {
                    *o += w * l;
                }
            }
        }
    }
    Measure::from_raw(out)
}

/// Population reward `Σ_{x,a} f(x, a, joint) joint(x, a)`.
pub fn population_reward(model: &ModelSpec, joint: &Measure) -> f64 {
    let n_a = model.n_actions();
    joint
        .weights()
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(i, w)| w * model.reward(i / n_a, i % n_a, joint))
        .sum()
}

/// `𝕋^κ W(μ)`: reward of `μ ⊗ κ` plus the discounted common-noise average
/// of `W` at the next law.
pub fn bellman_apply_kernel(model: &ModelSpec, w: &ValueTable, mu: &Measure, kernel: &ActionKernel) -> Result<f64> {
    check_kernel(model, mu, kernel)?;
    let joint = kernel.joint(mu);
    let mut cont = 0.0;
    for (e0, &p) in model.noise().common.weights().iter().enumerate() {
        if p > 0.0 {
            cont += p * w.evaluate(&next_measure_from_joint(model, &joint, e0))?;
        }
    }
    Ok(population_reward(model, &joint) + model.beta() * cont)
}

const ARGMAX_TIE: f64 = 1e-12;

/// First index whose value is within the tie tolerance of the maximum.
pub(crate) fn first_argmax(values: &[f64]) -> (f64, usize) {
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let idx = values.iter().position(|&v| v >= best - ARGMAX_TIE).expect("nonempty");
    (best, idx)
}

/// `sup_κ 𝕋^κ W(μ)` over a kernel family, with the first maximiser in the
/// family's enumeration order.
pub fn bellman_sup(model: &ModelSpec, w: &ValueTable, mu: &Measure, family: KernelFamily) -> Result<(f64, ActionKernel)> {
    let kernels = family.enumerate(model.n_states(), model.n_actions(), DEFAULT_KERNEL_CAP)?;
    let values = kernels.iter().map(|k| bellman_apply_kernel(model, w, mu, k)).collect::<Result<Vec<_>>>()?;
    let (v, i) = first_argmax(&values);
    Ok((v, kernels[i].clone()))
}

/// Result of [`value_iteration`].
#[derive(Debug, Clone)]
pub struct MeanFieldSolution {
    pub table: ValueTable,
    pub policy: MeanFieldPolicy,
    pub family: KernelFamily,
    pub tol: f64,
    /// Sup-norm change in the final sweep.
    pub residual: f64,
    pub sweeps: usize,
    /// Largest improvement of a doubled-resolution family over the
    /// family's own supremum at the probe nodes (never negative).
    pub family_gap: f64,
    /// `residual + family_gap`.
    pub epsilon: f64,
}

/// Sweeps guaranteed by contraction from `W ≡ 0`:
/// `⌈ln(tol (1-β) / R) / ln β⌉` with `R = max |f|`, at least one.
pub fn sweep_bound(beta: f64, reward_sup: f64, tol: f64) -> usize {
    if reward_sup <= 0.0 {
        return 1;
    }
    let b = ((tol * (1.0 - beta) / reward_sup).ln() / beta.ln()).ceil();
    if b.is_finite() && b >= 1.0 {
        b as usize
    } else {
        1
    }
}

/// Largest table this solver precomputes (nodes × kernels × common noises).
pub const TRANSITION_TABLE_CAP: u128 = 50_000_000;

/// Number of probe nodes used to measure the family-discretization gap.
pub const FAMILY_PROBES: usize = 16;

/// Synchronous value iteration of the lifted Bellman operator on `grid`,
/// from `W ≡ 0` until the sup-norm change is at most `tol`.
pub fn value_iteration(model: &ModelSpec, grid: Arc<SimplexGrid>, family: KernelFamily, tol: f64) -> Result<MeanFieldSolution> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if grid.n_states() != model.n_states() {
        return Err(Error::LengthMismatch { expected: model.n_states(), got: grid.n_states() });
    }
    let kernels = family.enumerate(model.n_states(), model.n_actions(), DEFAULT_KERNEL_CAP)?;
    let n_e0 = model.noise().common_size();
    let cells = grid.len() as u128 * kernels.len() as u128 * n_e0 as u128;
    if cells > TRANSITION_TABLE_CAP {
        return Err(Error::cap("value-iteration transition table", cells, TRANSITION_TABLE_CAP));
    }
    let space = model.states().clone();
    let common: Vec<f64> = model.noise().common.weights().to_vec();

    // rewards[i][k] and successor nodes next[i][k * n_e0 + e0]
    let pre: Vec<(Vec<f64>, Vec<usize>)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mu = grid.measure(i);
            let mut r = Vec::with_capacity(kernels.len());
            let mut nx = Vec::with_capacity(kernels.len() * n_e0);
            for k in &kernels {
                let joint = k.joint(&mu);
                r.push(population_reward(model, &joint));
                for e0 in 0..n_e0 {
                    nx.push(grid.nearest(&space, &next_measure_from_joint(model, &joint, e0)));
                }
            }
            (r, nx)
        })
        .collect();

    let beta = model.beta();
    let limit = 2 * sweep_bound(beta, model.reward_sup(), tol) + 10;
    let mut w = vec![0.0; grid.len()];
    let mut argmax = vec![0usize; grid.len()];
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while residual > tol {
        if sweeps >= limit {
            return Err(Error::Numerical(format!("value iteration stalled at residual {residual:e} after {sweeps} sweeps")));
        }
        let next: Vec<(f64, usize)> = pre
            .par_iter()
            .map(|(r, nx)| {
                let vals: Vec<f64> = (0..r.len())
                    .map(|k| {
                        let cont: f64 = (0..n_e0).map(|e0| common[e0] * w[nx[k * n_e0 + e0]]).sum();
                        r[k] + beta * cont
                    })
                    .collect();
                first_argmax(&vals)
            })
            .collect();
        residual = next.iter().zip(&w).fold(0.0f64, |m, ((v, _), old)| m.max((v - old).abs()));
        for (i, (v, k)) in next.into_iter().enumerate() {
            w[i] = v;
            argmax[i] = k;
        }
        sweeps += 1;
        log::debug!("sweep {sweeps}: residual {residual:e}");
    }

    let table = ValueTable::new(grid.clone(), space.clone(), w)?;
    let policy = MeanFieldPolicy::new(grid.clone(), space, argmax.iter().map(|&k| kernels[k].clone()).collect())?;
    let family_gap = family_gap(model, &table, family)?;
    Ok(MeanFieldSolution { table, policy, family, tol, residual, sweeps, family_gap, epsilon: residual + family_gap })
}

/// Evenly spaced node indices, at most `count` of them.
pub fn probe_nodes(n_nodes: usize, count: usize) -> Vec<usize> {
    if n_nodes <= count {
        return (0..n_nodes).collect();
    }
    let mut v: Vec<usize> = (0..count).map(|j| (j * (n_nodes - 1) + (count - 1) / 2) / (count - 1)).collect();
    v.dedup();
    v
}

/// `max_probe [sup_{finer} 𝕋 W − sup_{family} 𝕋 W]₊` at [`FAMILY_PROBES`] nodes.
pub fn family_gap(model: &ModelSpec, table: &ValueTable, family: KernelFamily) -> Result<f64> {
    let finer = family.refined();
    let grid = table.grid();
    let gaps = probe_nodes(grid.len(), FAMILY_PROBES)
        .into_par_iter()
        .map(|i| {
            let mu = grid.measure(i);
            let (coarse, _) = bellman_sup(model, table, &mu, family)?;
            let (fine, _) = bellman_sup(model, table, &mu, finer)?;
            Ok((fine - coarse).max(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

/// Monte-Carlo gain with its standard error and the truncation bias bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// `β^T · max|f| / (1-β)`: the discounted tail the horizon leaves out.
    pub truncation_bias: f64,
}

/// Gain of `policy` from `mu0` over `horizon` steps. The population law is
/// propagated exactly; only the common noise is sampled, one path per
/// substream.
pub fn policy_gain(
    model: &ModelSpec,
    policy: &MeanFieldPolicy,
    mu0: &Measure,
    horizon: usize,
    paths: usize,
    seed: u64,
) -> Result<GainEstimate> {
    if horizon == 0 || paths == 0 {
        return Err(Error::Domain("horizon and paths must be positive".into()));
    }
    if mu0.len() != model.n_states() {
        return Err(Error::LengthMismatch { expected: model.n_states(), got: mu0.len() });
    }
    let beta = model.beta();
    let common = model.noise().common.weights();
    let stream = rng::tag("policy_gain");
    let gains: Vec<f64> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut r = rng::substream(seed, stream, p as u64);
            let mut mu = mu0.clone();
            let mut total = 0.0;
            let mut disc = 1.0;
            for _ in 0..horizon {
                let joint = policy.kernel_at(&mu).joint(&mu);
                total += disc * population_reward(model, &joint);
                let e0 = if common.len() == 1 { 0 } else { sample_action(common, r.random::<f64>()) };
                mu = next_measure_from_joint(model, &joint, e0);
                disc *= beta;
            }
            total
        })
        .collect();
    let (mean, stderr) = rng::mean_and_stderr(&gains);
    let truncation_bias = beta.powi(horizon as i32) * model.reward_sup() / (1.0 - beta);
    Ok(GainEstimate { mean, stderr, truncation_bias })
}

/// `max_{i≠j} |V_i − V_j| / W_d(μ_i, μ_j)^γ` over grid nodes: an empirical
/// Hölder constant of the table. Quadratic in the node count.
pub fn holder_quotient(table: &ValueTable, gamma: f64) -> f64 {
    let grid = table.grid();
    let measures: Vec<Measure> = (0..grid.len()).map(|i| grid.measure(i)).collect();
    let v = table.values();
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0f64;
            for j in i + 1..grid.len() {
                let d = w1_distance(table.space(), &measures[i], &measures[j]);
                if d > 0.0 {
                    best = best.max((v[i] - v[j]).abs() / d.powf(gamma));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}
