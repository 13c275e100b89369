use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classes::{class_rank, counts_of, ClassIndex};
use super::policy::{ActionLaw, NAgentPolicy};
use super::unreduced::product_next_law;
use super::{assign_counts, check_joint, Layout, NAgentValueTable};
use crate::cmkv::{first_argmax, sweep_bound};
use crate::compose;
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::model::ModelSpec;

/// Largest number of (class, action-count matrix) pairs the reduced solver
/// precomputes.
pub const REDUCED_CAP: u128 = 5_000_000;

/// Expected reward and next-class law (common noise averaged in) of one
/// state-action count matrix.
#[derive(Debug, Clone)]
pub(crate) struct Transition {
    pub reward: f64,
    pub next: Vec<(usize, f64)>,
}

impl Transition {
    pub fn apply(&self, beta: f64, w: &[f64]) -> f64 {
        self.reward + beta * self.next.iter().map(|&(c, p)| p * w[c]).sum::<f64>()
    }
}

/// Every state-action count matrix compatible with the state counts, as an
/// odometer over states (state 0 most significant); within a state, action
/// counts run from "all on action 0" onwards.
pub(crate) fn count_matrices(counts: &[usize], n_actions: usize) -> Vec<Vec<Vec<usize>>> {
    let per_state: Vec<Vec<Vec<usize>>> = counts.iter().map(|&c| compose::compositions(c, n_actions)).collect();
    let mut out = vec![Vec::new()];
    for choices in &per_state {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Vec<usize>>| {
                choices.iter().map(move |c| {
                    let mut p = prefix.clone();
                    p.push(c.clone());
                    p
                })
            })
            .collect();
    }
    out
}

pub(crate) fn matrix_count(counts: &[usize], n_actions: usize) -> u128 {
    counts.iter().map(|&c| compose::composition_count(c, n_actions)).product()
}

pub(crate) fn joint_of_matrix(m: &[Vec<usize>]) -> Measure {
    let flat: Vec<usize> = m.iter().flatten().copied().collect();
    Measure::from_counts(&flat)
}

/// Law of the next state counts when the agents in cell `(x, a)` move
/// independently with the single-agent law, for each common noise.
pub(crate) fn matrix_transition(model: &ModelSpec, m: &[Vec<usize>]) -> Transition {
    let n: usize = m.iter().flatten().sum();
    let n_x = model.n_states();
    let joint = joint_of_matrix(m);
    let mut reward = 0.0;
    for (x, row) in m.iter().enumerate() {
        for (a, &c) in row.iter().enumerate() {
            if c > 0 {
                reward += c as f64 * model.reward(x, a, &joint);
            }
        }
    }
    reward /= n as f64;
    let mut next: BTreeMap<usize, f64> = BTreeMap::new();
    let mut law = vec![0.0; n_x];
    for (e0, &p0) in model.noise().common.weights().iter().enumerate() {
        if p0 <= 0.0 {
            continue;
        }
        let mut dist: BTreeMap<Vec<usize>, f64> = BTreeMap::from([(vec![0usize; n_x], 1.0)]);
        for (x, row) in m.iter().enumerate() {
            for (a, &c) in row.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                model.next_state_law(x, a, &joint, e0, &mut law);
                for _ in 0..c {
                    let mut nd = BTreeMap::new();
                    for (k, p) in &dist {
                        for (y, &q) in law.iter().enumerate() {
                            if q > 0.0 {
                                let mut k2 = k.clone();
                                k2[y] += 1;
                                *nd.entry(k2).or_insert(0.0) += p * q;
                            }
                        }
                    }
                    dist = nd;
                }
            }
        }
        for (k, p) in dist {
            *next.entry(class_rank(&k)).or_insert(0.0) += p0 * p;
        }
    }
    Transition { reward, next: next.into_iter().collect() }
}

pub(crate) fn matrix_of(model: &ModelSpec, x: &[usize], a: &[usize]) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0usize; model.n_actions()]; model.n_states()];
    for (&xi, &ai) in x.iter().zip(a) {
        m[xi][ai] += 1;
    }
    m
}

/// `𝕋^a_N W(x)`: reward of `(x, a)` plus the discounted exact expectation
/// of `W` at the next joint state.
pub fn bellman_tn_action(model: &ModelSpec, w: &NAgentValueTable, x: &[usize], a: &[usize]) -> Result<f64> {
    check_joint(model, x, a)?;
    if w.n != x.len() || w.n_states != model.n_states() {
        return Err(Error::LengthMismatch { expected: w.n, got: x.len() });
    }
    match w.layout {
        Layout::Classes => Ok(matrix_transition(model, &matrix_of(model, x, a)).apply(model.beta(), &w.values)),
        Layout::Full => {
            let law = ActionLaw::Deterministic(a.to_vec());
            let (r, next) = product_next_law(model, x, &law);
            Ok(r + model.beta() * next.iter().map(|&(s, p)| p * w.values[s]).sum::<f64>())
        }
    }
}

fn class_transitions(model: &ModelSpec, idx: &ClassIndex) -> Result<Vec<(Vec<Vec<Vec<usize>>>, Vec<Transition>)>> {
    let work: u128 = (0..idx.len()).map(|i| matrix_count(idx.counts(i), model.n_actions())).sum();
    if work > REDUCED_CAP {
        return Err(Error::cap("class-action pairs", work, REDUCED_CAP));
    }
    Ok((0..idx.len())
        .into_par_iter()
        .map(|i| {
            let ms = count_matrices(idx.counts(i), model.n_actions());
            let ts = ms.iter().map(|m| matrix_transition(model, m)).collect();
            (ms, ts)
        })
        .collect())
}

/// One application of `𝒯_N` (supremum over joint actions) to a class table.
pub fn bellman_tn(model: &ModelSpec, w: &NAgentValueTable) -> Result<NAgentValueTable> {
    if w.layout != Layout::Classes {
        return Err(Error::Domain("bellman_tn works on class tables".into()));
    }
    let idx = ClassIndex::new(w.n, model.n_states());
    let beta = model.beta();
    let values = class_transitions(model, &idx)?
        .iter()
        .map(|(_, ts)| ts.iter().map(|t| t.apply(beta, &w.values)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Ok(NAgentValueTable { n: w.n, n_states: w.n_states, layout: Layout::Classes, values })
}

/// Output of [`solve_vn`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NAgentSolution {
    pub table: NAgentValueTable,
    /// Maximising state-action count matrix of each class.
    pub choices: Vec<Vec<Vec<usize>>>,
    pub tol: f64,
    pub residual: f64,
    pub sweeps: usize,
}

impl NAgentSolution {
    pub fn policy(&self) -> CountPolicy {
        CountPolicy { n_states: self.table.n_states, choices: self.choices.clone() }
    }
}

/// Feedback policy playing a fixed action-count matrix in each class.
#[derive(Debug, Clone)]
pub struct CountPolicy {
    n_states: usize,
    choices: Vec<Vec<Vec<usize>>>,
}

impl NAgentPolicy for CountPolicy {
    fn action_law(&self, x: &[usize]) -> ActionLaw {
        let c = class_rank(&counts_of(x, self.n_states));
        ActionLaw::Deterministic(assign_counts(x, &self.choices[c]))
    }

    fn is_exchangeable(&self) -> bool {
        true
    }
}

/// Value iteration of `𝒯_N` on state-count classes from `W ≡ 0` until the
/// sup-norm change is at most `tol`.
pub fn solve_vn(model: &ModelSpec, n: usize, tol: f64) -> Result<NAgentSolution> {
    if n == 0 {
        return Err(Error::Domain("need at least one agent".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let idx = ClassIndex::new(n, model.n_states());
    let pre = class_transitions(model, &idx)?;
    let beta = model.beta();
    let limit = 2 * sweep_bound(beta, model.reward_sup(), tol) + 10;
    let mut w = vec![0.0; idx.len()];
    let mut arg = vec![0usize; idx.len()];
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while residual > tol {
        if sweeps >= limit {
            return Err(Error::Numerical(format!("N-agent value iteration stalled at {residual:e}")));
        }
        let next: Vec<(f64, usize)> = pre
            .par_iter()
            .map(|(_, ts)| first_argmax(&ts.iter().map(|t| t.apply(beta, &w)).collect::<Vec<_>>()))
            .collect();
        residual = next.iter().zip(&w).fold(0.0f64, |m, ((v, _), old)| m.max((v - old).abs()));
        for (i, (v, k)) in next.into_iter().enumerate() {
            w[i] = v;
            arg[i] = k;
        }
        sweeps += 1;
    }
    let choices = pre.iter().zip(&arg).map(|((ms, _), &k)| ms[k].clone()).collect();
    Ok(NAgentSolution {
        table: NAgentValueTable { n, n_states: model.n_states(), layout: Layout::Classes, values: w },
        choices,
        tol,
        residual,
        sweeps,
    })
}
