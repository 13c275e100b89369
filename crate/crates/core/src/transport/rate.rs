use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::w1_distance;
use crate::compose;
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::rng;
use crate::space::Metric;

/// Lower estimate of `M_N = sup_μ E[W(μ_N, μ)]` over a candidate list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MnEstimate {
    pub n: usize,
    pub value: f64,
    /// Standard error of the maximising candidate's mean (zero when exact).
    pub stderr: f64,
    pub argmax: usize,
    pub per_candidate: Vec<f64>,
}

/// Counts of `n` i.i.d. draws from `mu`, drawn as a chain of binomials.
pub fn sample_empirical_counts<R: Rng + ?Sized>(mu: &Measure, n: usize, rng: &mut R) -> Vec<usize> {
    let w = mu.weights();
    let mut counts = vec![0usize; w.len()];
    let mut left = n as u64;
    let mut mass_left = 1.0f64;
    let last = w.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    for (i, &p) in w.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i == last {
            counts[i] = left as usize;
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let q = (p / mass_left).clamp(0.0, 1.0);
        let k = Binomial::new(left, q).expect("valid binomial").sample(rng);
        counts[i] = k as usize;
        left -= k;
        mass_left -= p;
    }
    counts
}

/// Monte-Carlo mean and standard error of `W(μ̂_n, μ)` over `trials` draws.
/// Trial `t` uses substream `t` of the `(seed, stream)` family.
pub fn expected_empirical_w1(
    space: &(impl Metric + Sync),
    mu: &Measure,
    n: usize,
    trials: usize,
    seed: u64,
    stream: u64,
) -> Result<(f64, f64)> {
    if n == 0 || trials == 0 {
        return Err(Error::Domain("n and trials must be positive".into()));
    }
    if mu.len() != space.size() {
        return Err(Error::LengthMismatch { expected: space.size(), got: mu.len() });
    }
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::substream(seed, stream, t as u64);
            let counts = sample_empirical_counts(mu, n, &mut r);
            w1_distance(space, &Measure::from_counts(&counts), mu)
        })
        .collect();
    Ok(rng::mean_and_stderr(&values))
}

const EXACT_CAP: u128 = 2_000_000;

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Exact multinomial coefficient, `None` on overflow.
fn multinomial(counts: &[usize]) -> Option<u128> {
    let mut coef: u128 = 1;
    let mut seen: u128 = 0;
    for &c in counts {
        // running product of binomials C(seen + j, j), kept integral at each step
        for j in 1..=c as u128 {
            seen += 1;
            coef = coef.checked_mul(seen)? / j;
        }
    }
    Some(coef)
}

/// `E[W(μ̂_n, μ)]` by summing over every multinomial outcome.
pub fn expected_empirical_w1_exact(space: &impl Metric, mu: &Measure, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    if mu.len() != space.size() {
        return Err(Error::LengthMismatch { expected: space.size(), got: mu.len() });
    }
    let support: Vec<usize> = mu.support().collect();
    let outcomes = compose::composition_count(n, support.len());
    if outcomes > EXACT_CAP {
        return Err(Error::cap("multinomial outcomes", outcomes, EXACT_CAP));
    }
    let lf: Vec<f64> = (0..=n).map(ln_factorial).collect();
    let log_p: Vec<f64> = support.iter().map(|&i| mu[i].ln()).collect();
    let mut total = 0.0;
    for comp in compose::compositions(n, support.len()) {
        let prob = match multinomial(&comp) {
            Some(coef) => comp.iter().enumerate().fold(coef as f64, |acc, (k, &c)| acc * mu[support[k]].powi(c as i32)),
            None => {
                let mut lp = lf[n];
                for (k, &c) in comp.iter().enumerate() {
                    lp += c as f64 * log_p[k] - lf[c];
                }
                lp.exp()
            }
        };
        let mut counts = vec![0usize; mu.len()];
        for (k, &c) in comp.iter().enumerate() {
            counts[support[k]] = c;
        }
        total += prob * w1_distance(space, &Measure::from_counts(&counts), mu);
    }
    Ok(total)
}

/// Uniform law, every vertex of the simplex, then 32 Dirichlet(1, …, 1) draws.
pub fn default_candidates(size: usize, seed: u64) -> Vec<Measure> {
    let mut out = vec![Measure::uniform(size)];
    out.extend((0..size).map(|i| Measure::point_mass(size, i)));
    let mut r = rng::substream(seed, rng::tag("mn-candidates"), 0);
    for _ in 0..32 {
        let g: Vec<f64> = (0..size).map(|_| Exp1.sample(&mut r)).collect();
        let s: f64 = g.iter().sum();
        out.push(Measure::from_raw(g.into_iter().map(|v| v / s).collect()));
    }
    out
}

/// Maximum over `candidates` of the Monte-Carlo mean of `W(μ̂_n, μ)`.
pub fn estimate_mn(
    space: &(impl Metric + Sync),
    n: usize,
    candidates: &[Measure],
    trials: usize,
    seed: u64,
) -> Result<MnEstimate> {
    if candidates.is_empty() {
        return Err(Error::Domain("candidate list is empty".into()));
    }
    let base = rng::tag("estimate_mn");
    let mut per = Vec::with_capacity(candidates.len());
    let mut errs = Vec::with_capacity(candidates.len());
    for (c, mu) in candidates.iter().enumerate() {
        let (m, se) = expected_empirical_w1(space, mu, n, trials, seed, base.wrapping_add(c as u64))?;
        per.push(m);
        errs.push(se);
    }
    let argmax = argmax_first(&per);
    Ok(MnEstimate { n, value: per[argmax], stderr: errs[argmax], argmax, per_candidate: per })
}

/// Same as [`estimate_mn`] with exact expectations.
pub fn exact_mn(space: &impl Metric, n: usize, candidates: &[Measure]) -> Result<MnEstimate> {
    if candidates.is_empty() {
        return Err(Error::Domain("candidate list is empty".into()));
    }
    let per = candidates
        .iter()
        .map(|mu| expected_empirical_w1_exact(space, mu, n))
        .collect::<Result<Vec<_>>>()?;
    let argmax = argmax_first(&per);
    Ok(MnEstimate { n, value: per[argmax], stderr: 0.0, argmax, per_candidate: per })
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
