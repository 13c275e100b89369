use rayon::prelude::*;

use super::policy::ActionLaw;
use super::{all_joint_states, empirical_joint, full_index, reward_joint, step_joint, Layout, NAgentValueTable};
use crate::cmkv::sweep_bound;
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Ceiling on `|X|^N · |A|^N · |E|^N · |E⁰|` for [`solve_vn_unreduced`].
pub const UNREDUCED_CAP: u128 = 50_000_000;
/// Ceiling on `|X|^N` for full-table policy evaluation.
pub(crate) const FULL_STATE_CAP: u128 = 1 << 16;

/// Every joint action with positive probability under `law`.
pub(crate) fn joint_actions(law: &ActionLaw) -> Vec<(Vec<usize>, f64)> {
    match law {
        ActionLaw::Deterministic(a) => vec![(a.clone(), 1.0)],
        ActionLaw::PerAgent(rows) => {
            let mut out = vec![(Vec::with_capacity(rows.len()), 1.0)];
            for row in rows {
                out = out
                    .into_iter()
                    .flat_map(|(prefix, p)| {
                        row.iter().enumerate().filter(|(_, q)| **q > 0.0).map(move |(a, q)| {
                            let mut v = prefix.clone();
                            v.push(a);
                            (v, p * q)
                        })
                    })
                    .collect();
            }
            out
        }
    }
}

/// Expected one-step reward and next joint-state law (full indices) from
/// `x` under an action law; per-agent next-state laws are multiplied out.
pub(crate) fn product_next_law(model: &ModelSpec, x: &[usize], law: &ActionLaw) -> (f64, Vec<(usize, f64)>) {
    let n_x = model.n_states();
    let size = n_x.pow(x.len() as u32);
    let mut next = vec![0.0; size];
    let mut reward = 0.0;
    let mut single = vec![0.0; n_x];
    for (a, pa) in joint_actions(law) {
        let joint = empirical_joint(model, x, &a);
        reward += pa * reward_joint(model, x, &a).expect("validated joint state");
        for (e0, &p0) in model.noise().common.weights().iter().enumerate() {
            if p0 <= 0.0 {
                continue;
            }
            let mut dist: Vec<(usize, f64)> = vec![(0, pa * p0)];
            for (&xi, &ai) in x.iter().zip(&a) {
                model.next_state_law(xi, ai, &joint, e0, &mut single);
                dist = dist
                    .into_iter()
                    .flat_map(|(k, p)| {
                        single.iter().enumerate().filter(|(_, q)| **q > 0.0).map(move |(y, q)| (k * n_x + y, p * q))
                    })
                    .collect();
            }
            for (k, p) in dist {
                next[k] += p;
            }
        }
    }
    (reward, next.into_iter().enumerate().filter(|(_, p)| *p > 0.0).collect())
}

/// Value iteration over the full `X^N` with suprema over all of `A^N` and
/// every idiosyncratic noise vector in `E^N` enumerated. Meant as an
/// independent check of [`super::solve_vn`] for small `N`.
pub fn solve_vn_unreduced(model: &ModelSpec, n: usize, tol: f64) -> Result<NAgentValueTable> {
    if n == 0 || !(tol > 0.0) {
        return Err(Error::Domain("need n >= 1 and tol > 0".into()));
    }
    let (nx, na, ne, ne0) =
        (model.n_states() as u128, model.n_actions() as u128, model.noise().idio_size() as u128, model.noise().common_size() as u128);
    let work = (nx * na * ne).checked_pow(n as u32).map(|v| v * ne0).unwrap_or(u128::MAX);
    if work > UNREDUCED_CAP {
        return Err(Error::cap("unreduced N-agent terms", work, UNREDUCED_CAP));
    }
    let states: Vec<Vec<usize>> = all_joint_states(n, model.n_states()).collect();
    let actions: Vec<Vec<usize>> = all_joint_states(n, model.n_actions()).collect();
    let noises: Vec<Vec<usize>> = all_joint_states(n, model.noise().idio_size()).collect();
    let idio = model.noise().idio.weights();
    let common = model.noise().common.weights();
    let pre: Vec<Vec<(f64, Vec<(usize, f64)>)>> = states
        .par_iter()
        .map(|x| {
            actions
                .iter()
                .map(|a| {
                    let r = reward_joint(model, x, a).expect("valid");
                    let mut next = vec![0.0; states.len()];
                    for (e0, &p0) in common.iter().enumerate() {
                        for e in &noises {
                            let p: f64 = p0 * e.iter().map(|&k| idio[k]).product::<f64>();
                            if p > 0.0 {
                                let y = step_joint(model, x, a, e, e0).expect("valid");
                                next[full_index(&y, model.n_states())] += p;
                            }
                        }
                    }
                    (r, next.into_iter().enumerate().filter(|(_, p)| *p > 0.0).collect())
                })
                .collect()
        })
        .collect();
    let beta = model.beta();
    let limit = 2 * sweep_bound(beta, model.reward_sup(), tol) + 10;
    let mut w = vec![0.0; states.len()];
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while residual > tol {
        if sweeps >= limit {
            return Err(Error::Numerical("unreduced value iteration stalled".into()));
        }
        let next: Vec<f64> = pre
            .par_iter()
            .map(|per_a| {
                per_a
                    .iter()
                    .map(|(r, nx)| r + beta * nx.iter().map(|&(k, p)| p * w[k]).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        residual = next.iter().zip(&w).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        w = next;
        sweeps += 1;
    }
    Ok(NAgentValueTable { n, n_states: model.n_states(), layout: Layout::Full, values: w })
}
