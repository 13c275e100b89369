//! Transfer of a mean-field policy to the N-agent system.
//!
//! Two constructions are provided. [`lift_feedback`] picks the joint action
//! whose empirical state-action law is closest in `W_𝐝` to the target law
//! `μ_N[x] ⊗ κ`, where `κ` is the mean-field kernel at the node nearest to
//! `μ_N[x]`. [`lift_randomized`] lets every agent draw its own action from
//! its row of `κ` with a private uniform. [`lift_gap`] measures how much
//! value either construction loses against the N-agent optimum.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::cmkv::{sample_action, ActionKernel, GainEstimate, MeanFieldPolicy};
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::model::ModelSpec;
use crate::space::Metric;
use crate::nagent::{
    all_joint_states, assign_counts, check_states, counts_of, empirical_joint, evaluate_policy, mc_gain_n,
    solve_vn, ActionLaw, JointAction, NAgentPolicy,
};
use crate::transport::w1_distance;

/// Largest `|A|^N` searched by [`LiftSearch::BruteForce`].
pub const BRUTE_FORCE_CAP: u128 = 4096;

/// How [`lift_feedback_with`] minimises the coupling cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftSearch {
    /// Largest-remainder rounding of `n_x · κ(·|x)` in every state.
    #[default]
    Rounding,
    /// Exhaustive search over `A^N`; the lexicographically first minimiser wins.
    BruteForce,
}

/// Which lift to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftMode {
    Feedback,
    Randomized,
}

impl LiftMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Feedback => "feedback",
            Self::Randomized => "randomized",
        }
    }
}

impl std::str::FromStr for LiftMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feedback" => Ok(Self::Feedback),
            "randomized" => Ok(Self::Randomized),
            other => Err(Error::Config(format!("unknown lift mode `{other}`"))),
        }
    }
}

fn check_policy(model: &ModelSpec, policy: &MeanFieldPolicy) -> Result<()> {
    let k = policy.node_kernel(0);
    if k.n_states() != model.n_states() || k.n_actions() != model.n_actions() {
        return Err(Error::LengthMismatch {
            expected: model.n_states() * model.n_actions(),
            got: k.n_states() * k.n_actions(),
        });
    }
    Ok(())
}

fn kernel_for<'a>(policy: &'a MeanFieldPolicy, x: &[usize]) -> &'a ActionKernel {
    let mu = Measure::from_counts(&counts_of(x, policy.grid().n_states()));
    policy.kernel_at(&mu)
}

/// `ℒ(ξ_x, 𝔞(μ_N[x], ξ_x, U))`: the empirical state law of `x` combined with
/// the kernel at its nearest node.
pub fn lift_target(policy: &MeanFieldPolicy, x: &[usize]) -> Measure {
    let mu = Measure::from_counts(&counts_of(x, policy.grid().n_states()));
    policy.kernel_at(&mu).joint(&mu)
}

/// Integer split of `n` by largest remainder of `n · row`; ties go to the
/// smaller action.
pub fn largest_remainder(n: usize, row: &[f64]) -> Vec<usize> {
    let ideal: Vec<f64> = row.iter().map(|p| n as f64 * p).collect();
    let mut counts: Vec<usize> = ideal.iter().map(|v| (v + 1e-12).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let fr: Vec<f64> = ideal.iter().zip(&counts).map(|(v, &c)| v - c as f64).collect();
    let mut order: Vec<usize> = (0..row.len()).collect();
    // stable sort keeps the smaller action first among equal remainders
    order.sort_by(|&a, &b| {
        let (fa, fb) = (fr[a], fr[b]);
        if (fa - fb).abs() <= 1e-12 {
            std::cmp::Ordering::Equal
        } else {
            fb.partial_cmp(&fa).unwrap()
        }
    });
    for &a in order.iter().take(n.saturating_sub(assigned)) {
        counts[a] += 1;
    }
    counts
}

fn rounding_matrix(kernel: &ActionKernel, counts: &[usize]) -> Vec<Vec<usize>> {
    counts.iter().enumerate().map(|(x, &c)| largest_remainder(c, kernel.row(x))).collect()
}

/// Feedback lift with the default rounding search; returns the joint action
/// and its coupling cost `W_𝐝(target, μ_N[x, a])`.
pub fn lift_feedback(model: &ModelSpec, policy: &MeanFieldPolicy, x: &[usize]) -> Result<(JointAction, f64)> {
    lift_feedback_with(model, policy, x, LiftSearch::Rounding)
}

pub fn lift_feedback_with(
    model: &ModelSpec,
    policy: &MeanFieldPolicy,
    x: &[usize],
    search: LiftSearch,
) -> Result<(JointAction, f64)> {
    if x.is_empty() {
        return Err(Error::Domain("joint state needs at least one agent".into()));
    }
    check_states(model, x)?;
    check_policy(model, policy)?;
    let target = lift_target(policy, x);
    let cost = |a: &[usize]| w1_distance(model.product(), &target, &empirical_joint(model, x, a));
    match search {
        LiftSearch::Rounding => {
            let m = rounding_matrix(kernel_for(policy, x), &counts_of(x, model.n_states()));
            let a = assign_counts(x, &m);
            let c = cost(&a);
            Ok((a, c))
        }
        LiftSearch::BruteForce => {
            let size = (model.n_actions() as u128).checked_pow(x.len() as u32).unwrap_or(u128::MAX);
            if size > BRUTE_FORCE_CAP {
                return Err(Error::cap("joint actions", size, BRUTE_FORCE_CAP));
            }
            let mut best: Option<(JointAction, f64)> = None;
            for a in all_joint_states(x.len(), model.n_actions()) {
                let c = cost(&a);
                if best.as_ref().is_none_or(|(_, b)| c < b - 1e-12) {
                    best = Some((a, c));
                }
            }
            Ok(best.expect("at least one joint action"))
        }
    }
}

/// `a^i = 𝔞(μ_N[x], x^i, u^i)` for every agent.
pub fn lift_randomized(policy: &MeanFieldPolicy, x: &[usize], u: &[f64]) -> Result<JointAction> {
    if u.len() != x.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: u.len() });
    }
    if let Some(&bad) = u.iter().find(|v| !(0.0..1.0).contains(*v)) {
        return Err(Error::Domain(format!("uniform {bad} outside [0, 1)")));
    }
    let n_s = policy.grid().n_states();
    if let Some(&bad) = x.iter().find(|&&v| v >= n_s) {
        return Err(Error::IndexOutOfRange { index: bad, size: n_s });
    }
    let kernel = kernel_for(policy, x);
    Ok(x.iter().zip(u).map(|(&xi, &ui)| sample_action(kernel.row(xi), ui)).collect())
}

/// [`lift_feedback`] as an N-agent policy. The action-count matrix depends
/// only on the state counts and is memoized per class.
#[derive(Debug)]
pub struct LiftedFeedbackPolicy {
    source: MeanFieldPolicy,
    cache: RwLock<HashMap<Vec<usize>, Vec<Vec<usize>>>>,
}

impl LiftedFeedbackPolicy {
    pub fn new(source: MeanFieldPolicy) -> Self {
        Self { source, cache: RwLock::new(HashMap::new()) }
    }

    pub fn source(&self) -> &MeanFieldPolicy {
        &self.source
    }

    fn matrix(&self, counts: Vec<usize>) -> Vec<Vec<usize>> {
        if let Some(m) = self.cache.read().expect("cache lock").get(&counts) {
            return m.clone();
        }
        let mu = Measure::from_counts(&counts);
        let m = rounding_matrix(self.source.kernel_at(&mu), &counts);
        self.cache.write().expect("cache lock").entry(counts).or_insert(m).clone()
    }
}

impl NAgentPolicy for LiftedFeedbackPolicy {
    fn action_law(&self, x: &[usize]) -> ActionLaw {
        let m = self.matrix(counts_of(x, self.source.grid().n_states()));
        ActionLaw::Deterministic(assign_counts(x, &m))
    }

    fn is_exchangeable(&self) -> bool {
        true
    }
}

/// [`lift_randomized`] as an N-agent policy.
#[derive(Debug, Clone)]
pub struct LiftedRandomizedPolicy {
    source: MeanFieldPolicy,
}

impl LiftedRandomizedPolicy {
    pub fn new(source: MeanFieldPolicy) -> Self {
        Self { source }
    }

    pub fn source(&self) -> &MeanFieldPolicy {
        &self.source
    }
}

impl NAgentPolicy for LiftedRandomizedPolicy {
    fn action_law(&self, x: &[usize]) -> ActionLaw {
        let kernel = kernel_for(&self.source, x);
        ActionLaw::PerAgent(x.iter().map(|&xi| kernel.row(xi).to_vec()).collect())
    }

    fn is_exchangeable(&self) -> bool {
        true
    }
}

/// How the lifted policy's value is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GapEvaluation {
    /// Fixed point of the policy's Bellman operator.
    Exact { tol: f64 },
    /// Discounted Monte-Carlo gain; `V_N` is still computed exactly.
    MonteCarlo { tol: f64, horizon: usize, paths: usize, seed: u64 },
}

/// Value lost by a lifted policy at one initial joint state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub n: usize,
    pub mode: LiftMode,
    pub x0: Vec<usize>,
    pub v_n: f64,
    pub v_lift: f64,
    /// `V_N(x0) − V_lift(x0)`.
    pub gap: f64,
    /// Standard error of `v_lift` (zero in exact mode).
    pub stderr: f64,
    pub m_n_hat: f64,
    pub gamma: f64,
    pub eps_source: f64,
}

/// Build the lifted policy of the given mode.
pub fn lifted_policy(policy: &MeanFieldPolicy, mode: LiftMode) -> Box<dyn NAgentPolicy + Send> {
    match mode {
        LiftMode::Feedback => Box::new(LiftedFeedbackPolicy::new(policy.clone())),
        LiftMode::Randomized => Box::new(LiftedRandomizedPolicy::new(policy.clone())),
    }
}

/// Compare the lifted policy with the N-agent optimum at `x0`. `m_n_hat` and
/// `eps_source` are carried into the report unchanged.
#[allow(clippy::too_many_arguments)]
pub fn lift_gap(
    model: &ModelSpec,
    policy: &MeanFieldPolicy,
    mode: LiftMode,
    x0: &[usize],
    evaluation: GapEvaluation,
    m_n_hat: f64,
    eps_source: f64,
) -> Result<GapReport> {
    if x0.is_empty() {
        return Err(Error::Domain("joint state needs at least one agent".into()));
    }
    check_states(model, x0)?;
    check_policy(model, policy)?;
    let n = x0.len();
    let lifted = lifted_policy(policy, mode);
    let (tol, v_lift, stderr) = match evaluation {
        GapEvaluation::Exact { tol } => {
            let ev = evaluate_policy(model, n, lifted.as_ref(), tol)?;
            (tol, ev.table.value(x0), 0.0)
        }
        GapEvaluation::MonteCarlo { tol, horizon, paths, seed } => {
            let GainEstimate { mean, stderr, .. } = mc_gain_n(model, lifted.as_ref(), x0, horizon, paths, seed)?;
            (tol, mean, stderr)
        }
    };
    let v_n = solve_vn(model, n, tol)?.table.value(x0);
    Ok(GapReport {
        n,
        mode,
        x0: x0.to_vec(),
        v_n,
        v_lift,
        gap: v_n - v_lift,
        stderr,
        m_n_hat,
        gamma: model.gamma(),
        eps_source,
    })
}

/// `E[d_A(F⁻¹(U), G⁻¹(U))]` for one uniform `U` fed to both inverse CDFs.
pub fn shared_uniform_distance(actions: &impl Metric, f: &[f64], g: &[f64]) -> f64 {
    let cum = |row: &[f64]| -> Vec<f64> {
        let last = row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1);
        let mut c = 0.0;
        let mut out: Vec<f64> = row[..last].iter().map(|&p| { c += p; c.min(1.0) }).collect();
        out.push(1.0);
        out
    };
    let (cf, cg) = (cum(f), cum(g));
    let (mut i, mut j, mut lo, mut total) = (0, 0, 0.0f64, 0.0);
    while i < cf.len() && j < cg.len() {
        let hi = cf[i].min(cg[j]);
        if hi > lo {
            total += (hi - lo) * actions.dist(i, j);
            lo = hi;
        }
        if cf[i] <= hi {
            i += 1;
        }
        if cg[j] <= hi {
            j += 1;
        }
    }
    total
}

/// Smallest `K` with `E[d_A(𝔞(μ, x, U), 𝔞(μ, x', U))] ≤ K d(x, x')` over every
/// grid node and state pair. Under a uniform state metric this never exceeds
/// `diam(A) / d(x, x')`; otherwise it is only known after the fact.
pub fn randomized_lipschitz(policy: &MeanFieldPolicy, actions: &impl Metric) -> f64 {
    let states = policy.space();
    let n = states.size();
    let mut k = 0.0f64;
    for kernel in policy.kernels() {
        for x in 0..n {
            for y in x + 1..n {
                let e = shared_uniform_distance(actions, kernel.row(x), kernel.row(y));
                k = k.max(e / states.dist(x, y));
            }
        }
    }
    k
}
