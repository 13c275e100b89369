//! Experiment harness: N-agent vs mean-field value convergence, policy-lift
//! gaps, Bellman-operator comparison and the empirical-measure rate `M̂_N`.
//!
//! Every experiment is a pure function of the config and its seed. Work is
//! spread over rayon, but each Monte-Carlo item draws from its own
//! `(seed, tag, index)` substream and results are collected in input order,
//! so the CSV output does not depend on the number of workers.

mod fit;
mod plot;

pub use fit::{fit_loglog, RateFit};
pub use plot::{loglog_svg, Series};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::Artifact;
use crate::cmkv::{bellman_apply_kernel, value_iteration, ActionKernel, MeanFieldPolicy, MeanFieldSolution, SimplexGrid};
use crate::compose;
use crate::config::{BenchConfig, Config, SolverConfig};
use crate::error::Result;
use crate::lift::{lift_feedback, lift_randomized, randomized_lipschitz, lift_target, lifted_policy, LiftMode};
use crate::measure::Measure;
use crate::model::ModelSpec;
use crate::nagent::{bellman_tn_action, empirical_joint, evaluate_policy, solve_vn, ClassIndex, NAgentValueTable};
use crate::rng;
use crate::space::{Metric, ProductSpace};
use crate::transport::{default_candidates, estimate_mn, exact_mn, w1_distance, MnEstimate};

/// `M̂_N` is computed by exact enumeration while the number of empirical
/// count vectors stays at or below this.
pub const EXACT_MN_CAP: u128 = 100_000;
/// Slack allowed when checking that a lifted policy never beats `V_N`.
pub const GAP_SLACK: f64 = 1e-7;

/// `M̂_N` on `space`: exact multinomial enumeration when small enough,
/// Monte-Carlo with `trials` draws per candidate otherwise.
pub fn mn_hat(space: &(impl Metric + Sync), n: usize, trials: usize, seed: u64) -> Result<MnEstimate> {
    let candidates = default_candidates(space.size(), seed);
    if compose::composition_count(n, space.size()) <= EXACT_MN_CAP {
        exact_mn(space, n, &candidates)
    } else {
        estimate_mn(space, n, &candidates, trials, seed)
    }
}

/// Model, parameters and the solved mean-field problem shared by all runs.
#[derive(Debug, Clone)]
pub struct BenchContext {
    pub model: ModelSpec,
    pub solver: SolverConfig,
    pub bench: BenchConfig,
    pub solution: MeanFieldSolution,
    pub config_json: serde_json::Value,
}

impl BenchContext {
    pub fn new(cfg: &Config) -> Result<Self> {
        Self::from_parts(cfg.model.build()?, cfg.solver.clone(), cfg.bench.clone(), cfg.resolved_json())
    }

    pub fn from_parts(model: ModelSpec, solver: SolverConfig, bench: BenchConfig, config_json: serde_json::Value) -> Result<Self> {
        let grid = Arc::new(SimplexGrid::new(model.n_states(), solver.q)?);
        let solution = value_iteration(&model, grid, solver.family()?, solver.tol)?;
        Ok(Self { model, solver, bench, solution, config_json })
    }

    fn seed(&self) -> u64 {
        self.bench.seed
    }

    fn product(&self) -> &ProductSpace {
        self.model.product()
    }

    fn mn(&self, n: usize) -> Result<f64> {
        Ok(mn_hat(self.product(), n, self.bench.mn_trials, self.seed())?.value)
    }

    /// `V(μ_N[x])` for every class of `n` agents.
    pub fn unlifted_values(&self, n: usize) -> Result<NAgentValueTable> {
        let idx = ClassIndex::new(n, self.model.n_states());
        let values = (0..idx.len())
            .map(|c| self.solution.table.evaluate(&Measure::from_counts(idx.counts(c))))
            .collect::<Result<Vec<_>>>()?;
        NAgentValueTable::from_classes(n, self.model.n_states(), values)
    }
}

/// One row of the value-convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub x0_id: usize,
    #[serde(rename = "V_N")]
    pub v_n: f64,
    #[serde(rename = "V_check")]
    pub v_check: f64,
    /// `V_N(x) − V(μ_N[x])`.
    pub gap: f64,
    #[serde(rename = "M_N_hat")]
    pub m_n_hat: f64,
    pub gamma: f64,
    #[serde(rename = "C_fit")]
    pub c_fit: f64,
    pub q: usize,
    pub tol: f64,
    pub seed: u64,
}

/// Largest `|gap|` at one N and the initial class attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstGap {
    pub n: usize,
    pub x0_id: usize,
    pub gap: f64,
    pub m_n_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueConvergence {
    pub rows: Vec<ValueRow>,
    pub worst: Vec<WorstGap>,
    pub gamma: f64,
    /// `max_N sup_x |gap| / M̂_N^γ`.
    pub c_fit: f64,
}

/// Outcome of the scaled-gap check at the first and last N of the list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub gap_first: f64,
    pub gap_last: f64,
    /// `gap_last < gap_first`.
    pub decreasing: bool,
    /// `gap_N ≤ 2 (gap_first / M̂_first^γ) M̂_N^γ` for every N.
    pub within_factor_two: bool,
    /// `max_N (gap_N / M̂_N^γ) / (gap_first / M̂_first^γ)`.
    pub worst_ratio: f64,
}

impl ValueConvergence {
    pub fn scaling(&self) -> ScalingCheck {
        scaling_check(&self.worst.iter().map(|w| (w.gap, w.m_n_hat)).collect::<Vec<_>>(), self.gamma)
    }
}

fn scaling_check(gaps: &[(f64, f64)], gamma: f64) -> ScalingCheck {
    let (g0, m0) = gaps[0];
    let (gl, _) = gaps[gaps.len() - 1];
    let c0 = g0 / m0.powf(gamma);
    let within = gaps.iter().all(|&(g, m)| g <= 2.0 * c0 * m.powf(gamma));
    let worst_ratio = gaps.iter().map(|&(g, m)| g / m.powf(gamma) / c0).fold(0.0f64, f64::max);
    ScalingCheck { gap_first: g0, gap_last: gl, decreasing: gl < g0, within_factor_two: within, worst_ratio }
}

/// Exact `V_N` against `V(μ_N[x])` for every initial class and every N.
pub fn run_value_convergence(ctx: &BenchContext) -> Result<ValueConvergence> {
    let gamma = ctx.model.gamma();
    let per_n = ctx
        .bench
        .n_list
        .par_iter()
        .map(|&n| {
            let vn = solve_vn(&ctx.model, n, ctx.solver.tol)?;
            let check = ctx.unlifted_values(n)?;
            Ok((n, vn.table.values, check.values, ctx.mn(n)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut worst = Vec::new();
    for (n, vn, check, m) in per_n {
        let mut w = WorstGap { n, x0_id: 0, gap: f64::NEG_INFINITY, m_n_hat: m };
        for (c, (&v, &vc)) in vn.iter().zip(&check).enumerate() {
            let gap = v - vc;
            if gap.abs() > w.gap {
                w.gap = gap.abs();
                w.x0_id = c;
            }
            rows.push(ValueRow {
                n,
                x0_id: c,
                v_n: v,
                v_check: vc,
                gap,
                m_n_hat: m,
                gamma,
                c_fit: 0.0,
                q: ctx.solver.q,
                tol: ctx.solver.tol,
                seed: ctx.seed(),
            });
        }
        worst.push(w);
    }
    let c_fit = worst.iter().map(|w| w.gap / w.m_n_hat.powf(gamma)).fold(0.0f64, f64::max);
    for r in &mut rows {
        r.c_fit = c_fit;
    }
    Ok(ValueConvergence { rows, worst, gamma, c_fit })
}

/// One row of the policy-gap table: the initial class where the lifted
/// policy loses most.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub mode: String,
    #[serde(rename = "V_N")]
    pub v_n: f64,
    #[serde(rename = "V_lift")]
    pub v_lift: f64,
    pub gap: f64,
    pub eps_source: f64,
    #[serde(rename = "M_N_hat")]
    pub m_n_hat: f64,
    pub gamma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyGap {
    pub rows: Vec<PolicyRow>,
    /// Class attaining each row's gap.
    pub x0_ids: Vec<usize>,
    /// Most negative `V_N − V_lift` over all classes (should be ≥ −slack).
    pub min_gap: f64,
}

impl PolicyGap {
    /// Rows of one mode, in N order.
    pub fn mode_rows(&self, mode: LiftMode) -> Vec<&PolicyRow> {
        self.rows.iter().filter(|r| r.mode == mode.as_str()).collect()
    }
}

/// Exact value of both lifts of the solved mean-field policy, compared with
/// `V_N`, worst case over initial classes.
pub fn run_policy_gap(ctx: &BenchContext) -> Result<PolicyGap> {
    let gamma = ctx.model.gamma();
    let per_n = ctx
        .bench
        .n_list
        .par_iter()
        .map(|&n| {
            let vn = solve_vn(&ctx.model, n, ctx.solver.tol)?.table.values;
            let m = ctx.mn(n)?;
            let mut out = Vec::new();
            for mode in [LiftMode::Feedback, LiftMode::Randomized] {
                let p = lifted_policy(&ctx.solution.policy, mode);
                let lift = evaluate_policy(&ctx.model, n, p.as_ref(), ctx.solver.tol)?.table.values;
                let gaps: Vec<f64> = vn.iter().zip(&lift).map(|(a, b)| a - b).collect();
                let min = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
                let (c, _) = gaps.iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &g)| {
                    if g > bv { (i, g) } else { (bi, bv) }
                });
                let row = PolicyRow {
                    n,
                    mode: mode.as_str().into(),
                    v_n: vn[c],
                    v_lift: lift[c],
                    gap: gaps[c],
                    eps_source: ctx.solution.epsilon,
                    m_n_hat: m,
                    gamma,
                    seed: ctx.seed(),
                };
                out.push((row, c, min));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut x0_ids = Vec::new();
    let mut min_gap = f64::INFINITY;
    for (row, c, min) in per_n.into_iter().flatten() {
        rows.push(row);
        x0_ids.push(c);
        min_gap = min_gap.min(min);
    }
    Ok(PolicyGap { rows, x0_ids, min_gap })
}

/// Monte-Carlo `E[W_𝐝(target, μ_N[x, a])]` for the randomized lift at one
/// initial class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub x0_id: usize,
    pub mean: f64,
    pub stderr: f64,
    /// `(2 + Δ_A) M̂_N`.
    pub bound: f64,
    pub seed: u64,
}

impl CouplingRow {
    /// Mean within three standard errors of the bound.
    pub fn passes(&self) -> bool {
        self.mean <= self.bound + 3.0 * self.stderr
    }
}

/// `K` in the `(2 + K) M̂_N` coupling bound. A uniform state metric
/// guarantees `K = diam(A)` up to scale; otherwise the policy's own constant
/// is measured, and a warning is logged when it exceeds `diam(A)`.
pub fn coupling_constant(model: &ModelSpec, policy: &MeanFieldPolicy) -> f64 {
    let delta_a = model.actions().diameter();
    let k = randomized_lipschitz(policy, model.actions());
    if !model.states().is_uniform() && k > delta_a {
        log::warn!("extracted policy has action-Lipschitz constant {k:.4} > diam(A) = {delta_a:.4} under the state metric");
    }
    k.max(delta_a)
}

pub fn run_lift_coupling(ctx: &BenchContext) -> Result<Vec<CouplingRow>> {
    let draws = ctx.bench.lift_draws.max(2);
    let stream = rng::tag("lift_coupling");
    let k = coupling_constant(&ctx.model, &ctx.solution.policy);
    let per_n = ctx
        .bench
        .n_list
        .par_iter()
        .map(|&n| {
            let bound = (2.0 + k) * ctx.mn(n)?;
            let idx = ClassIndex::new(n, ctx.model.n_states());
            (0..idx.len())
                .map(|c| {
                    let x = idx.representative(c);
                    let target = lift_target(&ctx.solution.policy, &x);
                    let mut r = rng::substream(ctx.seed(), stream ^ n as u64, c as u64);
                    let mut w = Vec::with_capacity(draws);
                    for _ in 0..draws {
                        let u: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
                        let a = lift_randomized(&ctx.solution.policy, &x, &u)?;
                        w.push(w1_distance(ctx.product(), &target, &empirical_joint(&ctx.model, &x, &a)));
                    }
                    let (mean, stderr) = rng::mean_and_stderr(&w);
                    Ok(CouplingRow { n, x0_id: c, mean, stderr, bound, seed: ctx.seed() })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_n.into_iter().flatten().collect())
}

/// One sampled `(x, κ)` of the operator comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub sample: usize,
    /// `|𝕋^κ V(μ_N[x]) − 𝕋^a_N V̌(x)|` with `a` the feedback lift of `κ`.
    pub lhs: f64,
    /// `W_𝐝(μ_N[x] ⊗ κ, μ_N[x, a])`.
    pub coupling: f64,
    #[serde(rename = "M_N_hat")]
    pub m_n_hat: f64,
    pub gamma: f64,
    /// `lhs / (coupling^γ + M̂_N^γ)`.
    pub ratio: f64,
    pub seed: u64,
}

pub(crate) fn random_kernel<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> ActionKernel {
    let rows = (0..n_states)
        .map(|_| {
            let g: Vec<f64> = (0..n_actions).map(|_| Exp1.sample(rng)).collect();
            let s: f64 = g.iter().sum();
            g.into_iter().map(|v| v / s).collect()
        })
        .collect();
    ActionKernel::new(rows).expect("normalised rows")
}

/// Compare the mean-field and N-agent Bellman operators on the solved value
/// function at random joint states and random kernels.
pub fn run_operator_comparison(ctx: &BenchContext) -> Result<Vec<OperatorRow>> {
    let gamma = ctx.model.gamma();
    let stream = rng::tag("operator_comparison");
    let (n_x, n_a) = (ctx.model.n_states(), ctx.model.n_actions());
    let per_n = ctx
        .bench
        .n_list
        .iter()
        .map(|&n| {
            let m = ctx.mn(n)?;
            let check = ctx.unlifted_values(n)?;
            (0..ctx.bench.operator_samples)
                .into_par_iter()
                .map(|s| {
                    let mut r = rng::substream(ctx.seed(), stream ^ n as u64, s as u64);
                    let x: Vec<usize> = (0..n).map(|_| r.random_range(0..n_x)).collect();
                    let kernel = random_kernel(n_x, n_a, &mut r);
                    let policy = MeanFieldPolicy::constant(
                        ctx.solution.table.grid().clone(),
                        ctx.model.states().clone(),
                        kernel.clone(),
                    )?;
                    let (a, coupling) = lift_feedback(&ctx.model, &policy, &x)?;
                    let mu = Measure::from_counts(&crate::nagent::counts_of(&x, n_x));
                    let mf = bellman_apply_kernel(&ctx.model, &ctx.solution.table, &mu, &kernel)?;
                    let na = bellman_tn_action(&ctx.model, &check, &x, &a)?;
                    let lhs = (mf - na).abs();
                    let denom = coupling.powf(gamma) + m.powf(gamma);
                    let ratio = if denom > 0.0 { lhs / denom } else { 0.0 };
                    Ok(OperatorRow { n, sample: s, lhs, coupling, m_n_hat: m, gamma, ratio, seed: ctx.seed() })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_n.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M_N_hat")]
    pub m_n_hat: f64,
    pub stderr: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnRate {
    pub rows: Vec<MnRow>,
    pub fit: RateFit,
}

/// Monte-Carlo `M̂_N` on the model's state-action space over
/// `bench.rate_n_list`, with a log-log fit.
pub fn run_mn_rate(ctx: &BenchContext) -> Result<MnRate> {
    mn_rate_on(ctx.product(), &ctx.bench.rate_n_list, &default_candidates(ctx.product().size(), ctx.seed()), ctx.bench.mn_trials, ctx.seed())
}

/// [`run_mn_rate`] for an arbitrary space and candidate list.
pub fn mn_rate_on(space: &(impl Metric + Sync), n_list: &[usize], candidates: &[Measure], trials: usize, seed: u64) -> Result<MnRate> {
    let rows = n_list
        .iter()
        .map(|&n| {
            let e = estimate_mn(space, n, candidates, trials, seed)?;
            Ok(MnRow { n, m_n_hat: e.value, stderr: e.stderr, seed })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_loglog(&rows.iter().map(|r| (r.n as f64, r.m_n_hat)).collect::<Vec<_>>())?;
    Ok(MnRate { rows, fit })
}

/// Pass/fail of one check, with the numbers behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub mean_field: MeanFieldSummary,
    pub value_convergence: ValueConvergenceSummary,
    pub policy_gap: PolicyGapSummary,
    pub lift_coupling_max_ratio: f64,
    pub operator_c_empirical: f64,
    pub operator_max_coupling_over_mn: f64,
    pub mn_rate: RateFit,
    pub checks: BTreeMap<String, CheckResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSummary {
    pub q: usize,
    pub sweeps: usize,
    pub residual: f64,
    pub family_gap: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueConvergenceSummary {
    pub worst: Vec<WorstGap>,
    pub c_fit: f64,
    pub gamma: f64,
    pub scaling: ScalingCheck,
    /// Rows with `gap < −10 tol`.
    pub flagged_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyGapSummary {
    pub feedback: Vec<f64>,
    pub randomized: Vec<f64>,
    pub x0_ids: Vec<usize>,
    pub min_gap: f64,
}

/// Everything [`run_bench`] computed.
#[derive(Debug, Clone)]
pub struct BenchOutputs {
    pub value: ValueConvergence,
    pub policy: PolicyGap,
    pub coupling: Vec<CouplingRow>,
    pub operator: Vec<OperatorRow>,
    pub mn_rate: MnRate,
    pub summary: BenchSummary,
}

/// Assemble the checks from experiment outputs.
pub fn summarize(
    ctx: &BenchContext,
    value: &ValueConvergence,
    policy: &PolicyGap,
    coupling: &[CouplingRow],
    operator: &[OperatorRow],
    mn_rate: &MnRate,
) -> BenchSummary {
    let scaling = value.scaling();
    let flagged_rows = value.rows.iter().filter(|r| r.gap < -10.0 * r.tol).count();
    let mut checks = BTreeMap::new();
    checks.insert(
        "value_gap_decreases".into(),
        CheckResult::new(
            scaling.decreasing,
            format!("sup gap {:.6} at N={} vs {:.6} at N={}", scaling.gap_last, value.worst.last().map_or(0, |w| w.n), scaling.gap_first, value.worst[0].n),
        ),
    );
    checks.insert(
        "value_gap_scaling".into(),
        CheckResult::new(scaling.within_factor_two, format!("max scaled-gap ratio {:.4} (limit 2)", scaling.worst_ratio)),
    );
    let gamma = value.gamma;
    let mut bound_ok = true;
    let mut bound_detail = Vec::new();
    let mut decreasing = true;
    let mut dec_detail = Vec::new();
    for mode in [LiftMode::Feedback, LiftMode::Randomized] {
        let rows = policy.mode_rows(mode);
        for r in &rows {
            let bound = r.eps_source + 2.0 * value.c_fit * r.m_n_hat.powf(gamma);
            bound_ok &= r.gap <= bound;
            bound_detail.push(format!("{}@{}: {:.5}<={:.5}", mode.as_str(), r.n, r.gap, bound));
        }
        if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
            decreasing &= last.gap < first.gap;
            dec_detail.push(format!("{}: {:.6} at N={} vs {:.6} at N={}", mode.as_str(), last.gap, last.n, first.gap, first.n));
        }
    }
    bound_ok &= policy.min_gap >= -GAP_SLACK;
    checks.insert("lift_gap_bound".into(), CheckResult::new(bound_ok, bound_detail.join("; ")));
    checks.insert("lift_gap_decreases".into(), CheckResult::new(decreasing, dec_detail.join("; ")));
    let coupling_ok = coupling.iter().all(|r| r.passes());
    let lift_coupling_max_ratio = coupling.iter().map(|r| if r.bound > 0.0 { r.mean / r.bound } else { 0.0 }).fold(0.0f64, f64::max);
    checks.insert(
        "lift_coupling".into(),
        CheckResult::new(coupling_ok, format!("max E[W]/((2+Δ_A)M̂_N) = {lift_coupling_max_ratio:.4}")),
    );
    let operator_max_coupling_over_mn =
        operator.iter().map(|r| if r.m_n_hat > 0.0 { r.coupling / r.m_n_hat } else { 0.0 }).fold(0.0f64, f64::max);
    checks.insert(
        "feedback_coupling".into(),
        CheckResult::new(operator_max_coupling_over_mn <= 2.0, format!("max coupling/M̂_N = {operator_max_coupling_over_mn:.4} (limit 2)")),
    );
    let slope_ok = (mn_rate.fit.slope + 0.5).abs() <= 0.1;
    checks.insert("mn_rate_slope".into(), CheckResult::new(slope_ok, format!("slope {:.4} (target -0.5 ± 0.1)", mn_rate.fit.slope)));
    BenchSummary {
        mean_field: MeanFieldSummary {
            q: ctx.solver.q,
            sweeps: ctx.solution.sweeps,
            residual: ctx.solution.residual,
            family_gap: ctx.solution.family_gap,
            epsilon: ctx.solution.epsilon,
        },
        value_convergence: ValueConvergenceSummary {
            worst: value.worst.clone(),
            c_fit: value.c_fit,
            gamma,
            scaling,
            flagged_rows,
        },
        policy_gap: PolicyGapSummary {
            feedback: policy.mode_rows(LiftMode::Feedback).iter().map(|r| r.gap).collect(),
            randomized: policy.mode_rows(LiftMode::Randomized).iter().map(|r| r.gap).collect(),
            x0_ids: policy.x0_ids.clone(),
            min_gap: policy.min_gap,
        },
        lift_coupling_max_ratio,
        operator_c_empirical: operator.iter().map(|r| r.ratio).fold(0.0f64, f64::max),
        operator_max_coupling_over_mn,
        mn_rate: mn_rate.fit.clone(),
        checks,
    }
}

/// Run every experiment without writing anything.
pub fn run_all(ctx: &BenchContext) -> Result<BenchOutputs> {
    let value = run_value_convergence(ctx)?;
    let policy = run_policy_gap(ctx)?;
    let coupling = run_lift_coupling(ctx)?;
    let operator = run_operator_comparison(ctx)?;
    let mn_rate = run_mn_rate(ctx)?;
    let summary = summarize(ctx, &value, &policy, &coupling, &operator, &mn_rate);
    Ok(BenchOutputs { value, policy, coupling, operator, mn_rate, summary })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Run every experiment and write CSV tables, `summary.json` and, if
/// enabled, SVG plots into `out`.
pub fn run_bench(ctx: &BenchContext, out: &Path) -> Result<BenchOutputs> {
    fs::create_dir_all(out)?;
    let o = run_all(ctx)?;
    write_csv(&out.join("value_convergence.csv"), &o.value.rows)?;
    write_csv(&out.join("policy_gap.csv"), &o.policy.rows)?;
    write_csv(&out.join("lift_coupling.csv"), &o.coupling)?;
    write_csv(&out.join("operator_comparison.csv"), &o.operator)?;
    write_csv(&out.join("mn_rate.csv"), &o.mn_rate.rows)?;
    Artifact::new("bench_summary", ctx.config_json.clone(), o.summary.clone()).write(&out.join("summary.json"))?;
    if ctx.bench.emit_plots {
        let gaps: Vec<(f64, f64)> = o.value.worst.iter().map(|w| (w.n as f64, w.gap)).collect();
        let mns: Vec<(f64, f64)> = o.value.worst.iter().map(|w| (w.n as f64, w.m_n_hat)).collect();
        let fb: Vec<(f64, f64)> = o.policy.mode_rows(LiftMode::Feedback).iter().map(|r| (r.n as f64, r.gap)).collect();
        let rd: Vec<(f64, f64)> = o.policy.mode_rows(LiftMode::Randomized).iter().map(|r| (r.n as f64, r.gap)).collect();
        let svg = loglog_svg(
            "gap vs N",
            "N",
            "gap",
            &[
                Series { name: "value gap", points: gaps },
                Series { name: "M_N hat", points: mns },
                Series { name: "feedback lift", points: fb },
                Series { name: "randomized lift", points: rd },
            ],
        );
        fs::write(out.join("gap_vs_n.svg"), svg)?;
        let rate: Vec<(f64, f64)> = o.mn_rate.rows.iter().map(|r| (r.n as f64, r.m_n_hat)).collect();
        fs::write(out.join("mn_rate.svg"), loglog_svg("M_N hat vs N", "N", "M_N hat", &[Series { name: "M_N hat", points: rate }]))?;
    }
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_check_uses_first_entry() {
        let s = scaling_check(&[(0.1, 0.5), (0.06, 0.25), (0.04, 0.2)], 1.0);
        assert!(s.decreasing && s.within_factor_two);
        assert!((s.worst_ratio - 1.2).abs() < 1e-12);
        let s = scaling_check(&[(0.01, 0.5), (0.05, 0.25)], 1.0);
        assert!(!s.decreasing && !s.within_factor_two);
    }
}
