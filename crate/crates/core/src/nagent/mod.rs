//! The N-agent cooperative MDP.
//!
//! All agents share the transition `F` and reward `f`, evaluated at the
//! empirical state-action law `μ_N[x, a]`. Since the dynamics and reward are
//! symmetric under a simultaneous permutation of agents, the optimal value
//! only depends on the state counts of a joint state; [`solve_vn`] works on
//! these classes and on per-state action counts. [`solve_vn_unreduced`]
//! keeps the full `X^N × A^N` problem as an oracle for small `N`.

mod classes;
mod policy;
mod reduced;
mod unreduced;

pub use classes::{canonicalize, class_size, counts_of, CanonicalClass, ClassIndex};
pub use policy::{
    bellman_tn_policy, evaluate_policy, mc_gain_n, ActionLaw, ConstantPolicy, FeedbackFn, NAgentPolicy,
    PolicyEvaluation, StatewisePolicy,
};
pub use reduced::{bellman_tn, bellman_tn_action, solve_vn, CountPolicy, NAgentSolution};
pub use unreduced::{solve_vn_unreduced, UNREDUCED_CAP};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::model::ModelSpec;

/// State index of every agent.
pub type JointState = Vec<usize>;
/// Action index of every agent.
pub type JointAction = Vec<usize>;

pub(crate) fn check_joint(model: &ModelSpec, x: &[usize], a: &[usize]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Domain("joint state needs at least one agent".into()));
    }
    if a.len() != x.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: a.len() });
    }
    check_states(model, x)?;
    if let Some(&bad) = a.iter().find(|&&v| v >= model.n_actions()) {
        return Err(Error::IndexOutOfRange { index: bad, size: model.n_actions() });
    }
    Ok(())
}

pub(crate) fn check_states(model: &ModelSpec, x: &[usize]) -> Result<()> {
    if let Some(&bad) = x.iter().find(|&&v| v >= model.n_states()) {
        return Err(Error::IndexOutOfRange { index: bad, size: model.n_states() });
    }
    Ok(())
}

/// `μ_N[x, a]` on the product space.
pub fn empirical_joint(model: &ModelSpec, x: &[usize], a: &[usize]) -> Measure {
    let n_a = model.n_actions();
    let mut counts = vec![0usize; model.n_states() * n_a];
    for (&xi, &ai) in x.iter().zip(a) {
        counts[xi * n_a + ai] += 1;
    }
    Measure::from_counts(&counts)
}

/// One step of every agent under the shared empirical law.
pub fn step_joint(model: &ModelSpec, x: &[usize], a: &[usize], e: &[usize], e0: usize) -> Result<JointState> {
    check_joint(model, x, a)?;
    if e.len() != x.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: e.len() });
    }
    if let Some(&bad) = e.iter().find(|&&v| v >= model.noise().idio_size()) {
        return Err(Error::IndexOutOfRange { index: bad, size: model.noise().idio_size() });
    }
    if e0 >= model.noise().common_size() {
        return Err(Error::IndexOutOfRange { index: e0, size: model.noise().common_size() });
    }
    let joint = empirical_joint(model, x, a);
    Ok((0..x.len()).map(|i| model.transition(x[i], a[i], &joint, e[i], e0)).collect())
}

/// Average reward `(1/N) Σ f(x^i, a^i, μ_N[x, a])`.
pub fn reward_joint(model: &ModelSpec, x: &[usize], a: &[usize]) -> Result<f64> {
    check_joint(model, x, a)?;
    let joint = empirical_joint(model, x, a);
    Ok(x.iter().zip(a).map(|(&xi, &ai)| model.reward(xi, ai, &joint)).sum::<f64>() / x.len() as f64)
}

/// Give each agent an action so that the state-action counts equal `m`:
/// agents are taken in index order within each state, and receive actions
/// in increasing action order.
pub fn assign_counts(x: &[usize], m: &[Vec<usize>]) -> JointAction {
    let mut left: Vec<Vec<usize>> = m.to_vec();
    x.iter()
        .map(|&xi| {
            let a = left[xi].iter().position(|&c| c > 0).expect("counts match the joint state");
            left[xi][a] -= 1;
            a
        })
        .collect()
}

/// How values are indexed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One value per state-count class, in [`ClassIndex`] order.
    Classes,
    /// One value per joint state, agent 0 most significant.
    Full,
}

/// A function on `X^N`, stored per class or per joint state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NAgentValueTable {
    pub n: usize,
    pub n_states: usize,
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl NAgentValueTable {
    pub fn constant_classes(n: usize, n_states: usize, c: f64) -> Self {
        let len = crate::compose::composition_count(n, n_states) as usize;
        Self { n, n_states, layout: Layout::Classes, values: vec![c; len] }
    }

    /// Class-layout table from per-class values.
    pub fn from_classes(n: usize, n_states: usize, values: Vec<f64>) -> Result<Self> {
        let len = crate::compose::composition_count(n, n_states) as usize;
        if values.len() != len {
            return Err(Error::LengthMismatch { expected: len, got: values.len() });
        }
        Ok(Self { n, n_states, layout: Layout::Classes, values })
    }

    pub fn value(&self, x: &[usize]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        match self.layout {
            Layout::Classes => self.values[classes::class_rank(&counts_of(x, self.n_states))],
            Layout::Full => self.values[full_index(x, self.n_states)],
        }
    }

    pub fn sup_distance(&self, other: &NAgentValueTable) -> f64 {
        assert_eq!(self.layout, other.layout, "tables must share a layout");
        self.values.iter().zip(&other.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// The same function over all of `X^N`.
    pub fn to_full(&self) -> NAgentValueTable {
        match self.layout {
            Layout::Full => self.clone(),
            Layout::Classes => {
                let values = all_joint_states(self.n, self.n_states)
                    .map(|x| self.value(&x))
                    .collect();
                NAgentValueTable { n: self.n, n_states: self.n_states, layout: Layout::Full, values }
            }
        }
    }
}

pub(crate) fn full_index(x: &[usize], base: usize) -> usize {
    x.iter().fold(0usize, |acc, &v| acc * base + v)
}

/// Every vector in `{0..base}^n`, in the order of [`full_index`].
pub(crate) fn all_joint_states(n: usize, base: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = base.pow(n as u32);
    (0..total).map(move |mut k| {
        let mut v = vec![0usize; n];
        for slot in v.iter_mut().rev() {
            *slot = k % base;
            k /= base;
        }
        v
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_index_round_trips() {
        for (k, x) in all_joint_states(3, 3).enumerate() {
            assert_eq!(full_index(&x, 3), k);
        }
    }

    #[test]
    fn assign_counts_groups_by_state() {
        let x = [1, 0, 1, 0, 0];
        let m = vec![vec![1, 2], vec![0, 2]];
        assert_eq!(assign_counts(&x, &m), vec![1, 0, 1, 1, 1]);
    }
}
