//! Empirical lower bounds on the Lipschitz constants of `F` (in expectation
//! over the idiosyncratic noise) and of `f`.
//!
//! Both quotients are taken against `d(x,x') + d_A(a,a') + W(μ, μ')` on the
//! joint law. Measures are drawn from a grid of fixed denominator: with
//! quantized noise, `F` is a step function of the measure and its quotient is
//! unbounded on arbitrarily fine measure pairs, so the grid resolution is
//! part of what the estimate means.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compose;
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::model::ModelSpec;
use crate::rng;
use crate::space::Metric;
use crate::transport::w1_distance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProbe {
    pub samples: usize,
    pub seed: u64,
    /// Denominator of the joint-measure grid; defaults to `|E|`.
    pub grid_denominator: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub k_big_f_hat: f64,
    pub k_f_hat: f64,
    pub grid_denominator: usize,
    pub pairs: usize,
    /// Estimate exceeds the declared constant (by more than 1e-9).
    pub k_big_f_exceeds: bool,
    pub k_f_exceeds: bool,
}

#[derive(Clone)]
struct Point {
    x: usize,
    a: usize,
    joint: Measure,
}

fn quotients(model: &ModelSpec, p: &Point, q: &Point) -> Option<(f64, f64)> {
    let denom = model.states().dist(p.x, q.x)
        + model.actions().dist(p.a, q.a)
        + w1_distance(model.product(), &p.joint, &q.joint);
    if denom <= 0.0 {
        return None;
    }
    let idio = model.noise().idio.weights();
    let mut num_f = 0.0f64;
    for e0 in 0..model.noise().common_size() {
        let mut expd = 0.0;
        for (e, &w) in idio.iter().enumerate() {
            if w > 0.0 {
                let y = model.transition(p.x, p.a, &p.joint, e, e0);
                let y2 = model.transition(q.x, q.a, &q.joint, e, e0);
                expd += w * model.states().dist(y, y2);
            }
        }
        num_f = num_f.max(expd);
    }
    let num_r = (model.reward(p.x, p.a, &p.joint) - model.reward(q.x, q.a, &q.joint)).abs();
    Some((num_f / denom, num_r / denom))
}

fn report(model: &ModelSpec, kf: f64, kr: f64, denominator: usize, pairs: usize) -> LipschitzReport {
    let r = LipschitzReport {
        k_big_f_hat: kf,
        k_f_hat: kr,
        grid_denominator: denominator,
        pairs,
        k_big_f_exceeds: kf > model.k_big_f() + 1e-9,
        k_f_exceeds: kr > model.k_f() + 1e-9,
    };
    if r.k_big_f_exceeds {
        log::warn!("estimated K_F {kf:.4} exceeds declared {}", model.k_big_f());
    }
    if r.k_f_exceeds {
        log::warn!("estimated K_f {kr:.4} exceeds declared {}", model.k_f());
    }
    r
}

/// Uniformly random composition of `total` into `parts` (stars and bars).
fn random_composition<R: Rng + ?Sized>(total: usize, parts: usize, rng: &mut R) -> Vec<usize> {
    let mut bars = index::sample(rng, total + parts - 1, parts - 1).into_vec();
    bars.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0usize;
    for (i, &b) in bars.iter().enumerate() {
        out.push(b - prev - if i == 0 { 0 } else { 1 });
        prev = b;
    }
    let used: usize = out.iter().sum();
    out.push(total - used);
    out
}

/// Maximum quotients over `samples` random pairs of `(x, a, joint)`.
pub fn estimate_lipschitz_constants(model: &ModelSpec, probe: &LipschitzProbe) -> Result<LipschitzReport> {
    if probe.samples == 0 {
        return Err(Error::Domain("samples must be positive".into()));
    }
    let denominator = probe.grid_denominator.unwrap_or(model.noise().idio_size());
    let cells = model.product().size();
    let stream = rng::tag("lipschitz");
    let draw = |r: &mut rng::StreamRng| Point {
        x: r.random_range(0..model.n_states()),
        a: r.random_range(0..model.n_actions()),
        joint: Measure::from_counts(&random_composition(denominator, cells, r)),
    };
    let (kf, kr) = (0..probe.samples)
        .into_par_iter()
        .map(|s| {
            let mut r = rng::substream(probe.seed, stream, s as u64);
            let p = draw(&mut r);
            let q = draw(&mut r);
            quotients(model, &p, &q).unwrap_or((0.0, 0.0))
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(report(model, kf, kr, denominator, probe.samples))
}

const SWEEP_CAP: u128 = 50_000_000;

/// Exhaustive version: every pair of `(x, a, joint)` with the joint law on
/// the grid of the given denominator.
pub fn sweep_lipschitz_constants(model: &ModelSpec, denominator: usize) -> Result<LipschitzReport> {
    let cells = model.product().size();
    let n_measures = compose::composition_count(denominator, cells);
    let n_points = n_measures * (model.n_states() * model.n_actions()) as u128;
    let pairs = n_points * n_points.saturating_sub(1) / 2;
    if pairs > SWEEP_CAP {
        return Err(Error::cap("Lipschitz sweep pairs", pairs, SWEEP_CAP));
    }
    let mut points = Vec::with_capacity(n_points as usize);
    for c in compose::compositions(denominator, cells) {
        let joint = Measure::from_counts(&c);
        for x in 0..model.n_states() {
            for a in 0..model.n_actions() {
                points.push(Point { x, a, joint: joint.clone() });
            }
        }
    }
    let (kf, kr) = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut best = (0.0f64, 0.0f64);
            for j in i + 1..points.len() {
                if let Some((f, r)) = quotients(model, &points[i], &points[j]) {
                    best = (best.0.max(f), best.1.max(r));
                }
            }
            best
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(report(model, kf, kr, denominator, pairs as usize))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compositions_are_valid() {
        let mut r = rng::substream(1, 2, 3);
        for _ in 0..200 {
            let c = random_composition(7, 4, &mut r);
            assert_eq!(c.len(), 4);
            assert_eq!(c.iter().sum::<usize>(), 7);
        }
    }
}
