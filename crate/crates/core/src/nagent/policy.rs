use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classes::ClassIndex;
use super::reduced::{matrix_of, matrix_transition, Transition};
use super::unreduced::{joint_actions, product_next_law, FULL_STATE_CAP};
use super::{all_joint_states, check_states, reward_joint, step_joint, JointAction, Layout, NAgentValueTable};
use crate::cmkv::{sample_action, sweep_bound, GainEstimate};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::rng;

/// Law of the joint action at a joint state.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionLaw {
    Deterministic(JointAction),
    /// Independent per-agent action distributions.
    PerAgent(Vec<Vec<f64>>),
}

impl ActionLaw {
    /// Draw a joint action; agent `i` uses the `i`-th uniform from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> JointAction {
        match self {
            Self::Deterministic(a) => a.clone(),
            Self::PerAgent(rows) => rows.iter().map(|row| sample_action(row, rng.random::<f64>())).collect(),
        }
    }
}

/// A (possibly randomized) feedback policy of the N-agent system.
pub trait NAgentPolicy: Sync {
    fn action_law(&self, x: &[usize]) -> ActionLaw;

    /// Whether the law of the state-action counts at `x` depends on `x`
    /// only through its state counts. Exchangeable policies are evaluated
    /// on classes; all others on the full joint-state table.
    fn is_exchangeable(&self) -> bool {
        false
    }
}

/// The same joint action everywhere.
#[derive(Debug, Clone)]
pub struct ConstantPolicy(pub JointAction);

impl NAgentPolicy for ConstantPolicy {
    fn action_law(&self, _x: &[usize]) -> ActionLaw {
        ActionLaw::Deterministic(self.0.clone())
    }
}

/// Each agent draws its action from the row of its own state.
#[derive(Debug, Clone)]
pub struct StatewisePolicy {
    pub rows: Vec<Vec<f64>>,
}

impl NAgentPolicy for StatewisePolicy {
    fn action_law(&self, x: &[usize]) -> ActionLaw {
        ActionLaw::PerAgent(x.iter().map(|&s| self.rows[s].clone()).collect())
    }

    fn is_exchangeable(&self) -> bool {
        true
    }
}

/// Arbitrary deterministic feedback `x ↦ a`.
#[derive(Clone)]
pub struct FeedbackFn(pub Arc<dyn Fn(&[usize]) -> JointAction + Send + Sync>);

impl fmt::Debug for FeedbackFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FeedbackFn")
    }
}

impl NAgentPolicy for FeedbackFn {
    fn action_law(&self, x: &[usize]) -> ActionLaw {
        ActionLaw::Deterministic((self.0)(x))
    }
}

fn validate_law(model: &ModelSpec, x: &[usize], law: &ActionLaw) -> Result<()> {
    let n = x.len();
    match law {
        ActionLaw::Deterministic(a) => super::check_joint(model, x, a),
        ActionLaw::PerAgent(rows) => {
            if rows.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: rows.len() });
            }
            for row in rows {
                if row.len() != model.n_actions() {
                    return Err(Error::LengthMismatch { expected: model.n_actions(), got: row.len() });
                }
            }
            Ok(())
        }
    }
}

/// Reward and next-class law at the class of `x`, averaged over the
/// policy's action-count law.
fn class_transition(model: &ModelSpec, x: &[usize], law: &ActionLaw) -> Transition {
    let mut by_matrix: BTreeMap<Vec<Vec<usize>>, f64> = BTreeMap::new();
    for (a, p) in joint_actions(law) {
        *by_matrix.entry(matrix_of(model, x, &a)).or_insert(0.0) += p;
    }
    let mut reward = 0.0;
    let mut next: BTreeMap<usize, f64> = BTreeMap::new();
    for (m, p) in by_matrix {
        let t = matrix_transition(model, &m);
        reward += p * t.reward;
        for (c, q) in t.next {
            *next.entry(c).or_insert(0.0) += p * q;
        }
    }
    Transition { reward, next: next.into_iter().collect() }
}

fn policy_transitions(model: &ModelSpec, n: usize, policy: &dyn NAgentPolicy, layout: &Layout) -> Result<Vec<Transition>> {
    match layout {
        Layout::Classes => {
            let idx = ClassIndex::new(n, model.n_states());
            (0..idx.len())
                .into_par_iter()
                .map(|i| {
                    let x = idx.representative(i);
                    let law = policy.action_law(&x);
                    validate_law(model, &x, &law)?;
                    Ok(class_transition(model, &x, &law))
                })
                .collect()
        }
        Layout::Full => {
            let size = (model.n_states() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
            if size > FULL_STATE_CAP {
                return Err(Error::cap("joint states", size, FULL_STATE_CAP));
            }
            let states: Vec<Vec<usize>> = all_joint_states(n, model.n_states()).collect();
            states
                .par_iter()
                .map(|x| {
                    let law = policy.action_law(x);
                    validate_law(model, x, &law)?;
                    let (reward, next) = product_next_law(model, x, &law);
                    Ok(Transition { reward, next })
                })
                .collect()
        }
    }
}

fn layout_for(policy: &dyn NAgentPolicy, w: Option<&NAgentValueTable>) -> Layout {
    match w {
        Some(t) if t.layout == Layout::Full => Layout::Full,
        _ if policy.is_exchangeable() => Layout::Classes,
        _ => Layout::Full,
    }
}

/// `𝒯^π_N W`: one application of the policy's Bellman operator. The result
/// is a class table when the policy is exchangeable and `W` is a class
/// table, and a full table otherwise.
pub fn bellman_tn_policy(model: &ModelSpec, w: &NAgentValueTable, policy: &dyn NAgentPolicy) -> Result<NAgentValueTable> {
    let layout = layout_for(policy, Some(w));
    let w = if layout == Layout::Full { w.to_full() } else { w.clone() };
    let beta = model.beta();
    let values = policy_transitions(model, w.n, policy, &layout)?.iter().map(|t| t.apply(beta, &w.values)).collect();
    Ok(NAgentValueTable { n: w.n, n_states: w.n_states, layout, values })
}

/// Fixed point of `𝒯^π_N` with its final residual.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub table: NAgentValueTable,
    pub residual: f64,
    pub sweeps: usize,
}

/// Iterate `𝒯^π_N` from zero until the sup-norm change is at most `tol`.
pub fn evaluate_policy(model: &ModelSpec, n: usize, policy: &dyn NAgentPolicy, tol: f64) -> Result<PolicyEvaluation> {
    if n == 0 || !(tol > 0.0) {
        return Err(Error::Domain("need n >= 1 and tol > 0".into()));
    }
    let layout = layout_for(policy, None);
    let pre = policy_transitions(model, n, policy, &layout)?;
    let beta = model.beta();
    let limit = 2 * sweep_bound(beta, model.reward_sup(), tol) + 10;
    let mut w = vec![0.0; pre.len()];
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while residual > tol {
        if sweeps >= limit {
            return Err(Error::Numerical("policy evaluation stalled".into()));
        }
        let next: Vec<f64> = pre.par_iter().map(|t| t.apply(beta, &w)).collect();
        residual = next.iter().zip(&w).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        w = next;
        sweeps += 1;
    }
    Ok(PolicyEvaluation {
        table: NAgentValueTable { n, n_states: model.n_states(), layout, values: w },
        residual,
        sweeps,
    })
}

/// Monte-Carlo discounted average reward of `policy` from `x0` over
/// `horizon` steps, with every noise sampled. Path `p` uses substream `p`.
pub fn mc_gain_n(
    model: &ModelSpec,
    policy: &dyn NAgentPolicy,
    x0: &[usize],
    horizon: usize,
    paths: usize,
    seed: u64,
) -> Result<GainEstimate> {
    if horizon == 0 || paths == 0 || x0.is_empty() {
        return Err(Error::Domain("horizon, paths and N must be positive".into()));
    }
    check_states(model, x0)?;
    validate_law(model, x0, &policy.action_law(x0))?;
    let beta = model.beta();
    let idio = model.noise().idio.weights();
    let common = model.noise().common.weights();
    let stream = rng::tag("mc_gain_n");
    let gains = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut r = rng::substream(seed, stream, p as u64);
            let mut x = x0.to_vec();
            let mut total = 0.0;
            let mut disc = 1.0;
            for _ in 0..horizon {
                let a = policy.action_law(&x).sample(&mut r);
                total += disc * reward_joint(model, &x, &a)?;
                let e: Vec<usize> = (0..x.len()).map(|_| sample_action(idio, r.random::<f64>())).collect();
                let e0 = sample_action(common, r.random::<f64>());
                x = step_joint(model, &x, &a, &e, e0)?;
                disc *= beta;
            }
            Ok(total)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = rng::mean_and_stderr(&gains);
    let truncation_bias = beta.powi(horizon as i32) * model.reward_sup() / (1.0 - beta);
    Ok(GainEstimate { mean, stderr, truncation_bias })
}
