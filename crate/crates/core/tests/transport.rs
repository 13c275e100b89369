mod common;

use common::{brute_force_matching, m, random_measure, random_metric};
use mfchaos::transport::{
    default_candidates, empirical_measure, estimate_mn, exact_mn, expected_empirical_w1, expected_empirical_w1_exact,
    kantorovich_dual_value, optimal_permutation, optimal_permutation_with, wasserstein1, PermutationMethod,
};
use mfchaos::{rng, FiniteMetricSpace, Measure};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn empirical_measure_counts() {
    assert_eq!(empirical_measure(&[0, 1, 1], 2).unwrap().weights(), &[1.0 / 3.0, 2.0 / 3.0]);
    assert_eq!(empirical_measure(&[0], 2).unwrap().weights(), &[1.0, 0.0]);
    // (0,1) and (1,1) on the 2×2 product, flat index x·|A| + a
    assert_eq!(empirical_measure(&[1, 3], 4).unwrap().weights(), &[0.0, 0.5, 0.0, 0.5]);
    assert!(empirical_measure(&[2], 2).is_err());
}

#[test]
fn two_point_w1_matches_polytope_search() {
    // the 2×2 transport polytope is a segment: plan = [[a−t, t], [b−a+t, 1−b−t]]
    let space = FiniteMetricSpace::discrete(2);
    let mut r = rng::substream(1, 2, 0);
    for _ in 0..50 {
        let (a, b) = (r.random::<f64>(), r.random::<f64>());
        let lo = (a - b).max(0.0);
        let hi = a.min(1.0 - b);
        let grid = 20_000;
        let best = (0..=grid)
            .map(|k| lo + (hi - lo) * k as f64 / grid as f64)
            .map(|t| t + (b - a + t))
            .fold(f64::INFINITY, f64::min);
        let (w, c) = wasserstein1(&space, &m(&[a, 1.0 - a]), &m(&[b, 1.0 - b])).unwrap();
        assert!((w - best).abs() < 1e-9, "{w} vs {best}");
        assert!(c.marginal_error() < 1e-9);
    }
    let (w, _) = wasserstein1(&space, &m(&[0.5, 0.5]), &m(&[1.0, 0.0])).unwrap();
    assert!((w - 0.5).abs() < 1e-12);
    assert!((kantorovich_dual_value(&space, &m(&[0.5, 0.5]), &m(&[1.0, 0.0])).unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn line_metric_forced_path() {
    let line = FiniteMetricSpace::line(3);
    let (mu, nu) = (m(&[1.0, 0.0, 0.0]), m(&[0.0, 0.0, 1.0]));
    assert!((wasserstein1(&line, &mu, &nu).unwrap().0 - 2.0).abs() < 1e-12);
    assert!((kantorovich_dual_value(&line, &mu, &nu).unwrap() - 2.0).abs() < 1e-9);
    assert_eq!(wasserstein1(&line, &mu, &mu).unwrap().0, 0.0);
    assert!(kantorovich_dual_value(&line, &mu, &mu).unwrap().abs() < 1e-12);
}

#[test]
fn primal_equals_dual_on_random_instances() {
    let mut r = rng::substream(11, 0, 0);
    for i in 0..500 {
        let n = 2 + i % 7;
        let space = random_metric(n, &mut r);
        let (mu, nu) = (random_measure(n, &mut r), random_measure(n, &mut r));
        let (p, c) = wasserstein1(&space, &mu, &nu).unwrap();
        let d = kantorovich_dual_value(&space, &mu, &nu).unwrap();
        assert!((p - d).abs() <= 1e-7, "instance {i}: primal {p} dual {d}");
        assert!(c.marginal_error() <= 1e-9);
        assert!(c.cost(&space) >= p - 1e-9);
        assert!(c.plan.iter().flatten().all(|&v| v >= -1e-12));
    }
}

#[test]
fn empirical_w1_equals_matching_cost() {
    // for equal-size empirical measures W1 is an optimal matching
    let mut r = rng::substream(12, 0, 0);
    for n in 1..=7 {
        for _ in 0..20 {
            let size = 2 + r.random_range(0..4);
            let space = random_metric(size, &mut r);
            let y: Vec<usize> = (0..n).map(|_| r.random_range(0..size)).collect();
            let yp: Vec<usize> = (0..n).map(|_| r.random_range(0..size)).collect();
            let (_, oracle) = brute_force_matching(&space, &y, &yp);
            let w = wasserstein1(&space, &empirical_measure(&y, size).unwrap(), &empirical_measure(&yp, size).unwrap()).unwrap().0;
            assert!((w - oracle).abs() <= 1e-12, "n={n}: {w} vs {oracle}");
        }
    }
}

#[test]
fn permutation_matches_exhaustive_oracle() {
    let mut r = rng::substream(13, 0, 0);
    for n in 1..=7 {
        for _ in 0..25 {
            let size = 2 + r.random_range(0..3);
            let space = if r.random::<bool>() { FiniteMetricSpace::discrete(size) } else { random_metric(size, &mut r) };
            let y: Vec<usize> = (0..n).map(|_| r.random_range(0..size)).collect();
            let yp: Vec<usize> = (0..n).map(|_| r.random_range(0..size)).collect();
            let (sigma, cost) = brute_force_matching(&space, &y, &yp);
            let got = optimal_permutation(&space, &y, &yp).unwrap();
            assert!((got.cost - cost).abs() <= 1e-12);
            assert_eq!(got.sigma, sigma, "tie-break differs for y={y:?} y'={yp:?}");
            let hung = optimal_permutation_with(&space, &y, &yp, PermutationMethod::Assignment).unwrap();
            assert!((hung.cost - cost).abs() <= 1e-12);
            assert_eq!(hung.sigma, sigma);
        }
    }
}

#[test]
fn permutation_examples() {
    let d = FiniteMetricSpace::discrete(2);
    let p = optimal_permutation(&d, &[0, 1, 1], &[0, 1, 1]).unwrap();
    assert_eq!((p.sigma, p.cost), (vec![0, 1, 2], 0.0));
    let p = optimal_permutation(&d, &[0, 1], &[1, 0]).unwrap();
    assert_eq!((p.sigma, p.cost), (vec![1, 0], 0.0));
    let p = optimal_permutation(&d, &[0, 0], &[0, 1]).unwrap();
    assert_eq!((p.sigma, p.cost), (vec![0, 1], 0.5));
    assert!(optimal_permutation(&d, &[0], &[0, 1]).is_err());
}

#[test]
fn large_permutations_agree_with_w1() {
    let mut r = rng::substream(14, 0, 0);
    let space = random_metric(5, &mut r);
    for n in [9, 12, 20] {
        let y: Vec<usize> = (0..n).map(|_| r.random_range(0..5)).collect();
        let yp: Vec<usize> = (0..n).map(|_| r.random_range(0..5)).collect();
        let p = optimal_permutation(&space, &y, &yp).unwrap();
        let w = wasserstein1(&space, &empirical_measure(&y, 5).unwrap(), &empirical_measure(&yp, 5).unwrap()).unwrap().0;
        assert!((p.cost - w).abs() < 1e-9);
        let mut s = p.sigma.clone();
        s.sort_unstable();
        assert_eq!(s, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn two_point_uniform_deviation_is_a_quarter() {
    // E|Bin(2, 1/2)/2 − 1/2| = (1/4)(1/2) + (1/2)(0) + (1/4)(1/2)
    let oracle: f64 = [(0.25, 0.5), (0.5, 0.0), (0.25, 0.5)].iter().map(|(p, w)| p * w).sum();
    assert_eq!(oracle, 0.25);
    let d = FiniteMetricSpace::discrete(2);
    assert!((expected_empirical_w1_exact(&d, &Measure::uniform(2), 2).unwrap() - oracle).abs() < 1e-15);
    let e = exact_mn(&d, 2, &[Measure::uniform(2)]).unwrap();
    assert!((e.value - 0.25).abs() < 1e-15);
}

#[test]
fn point_mass_candidates_give_zero() {
    let d = FiniteMetricSpace::discrete(3);
    let e = estimate_mn(&d, 17, &[Measure::point_mass(3, 1)], 100, 5).unwrap();
    assert_eq!(e.value, 0.0);
    assert_eq!(e.stderr, 0.0);
}

#[test]
fn monte_carlo_agrees_with_exact_expectation() {
    let space = mfchaos::ProductSpace::new(FiniteMetricSpace::discrete(2), FiniteMetricSpace::discrete(2));
    for (i, mu) in default_candidates(4, 3).iter().take(8).enumerate() {
        let exact = expected_empirical_w1_exact(&space, mu, 6).unwrap();
        let (mc, se) = expected_empirical_w1(&space, mu, 6, 4000, 9, i as u64).unwrap();
        assert!((mc - exact).abs() <= 4.0 * se + 1e-12, "candidate {i}: {mc} ± {se} vs {exact}");
    }
}

#[test]
fn mn_decreases_with_paired_seeds() {
    let space = mfchaos::ProductSpace::new(FiniteMetricSpace::discrete(2), FiniteMetricSpace::discrete(2));
    let cands = default_candidates(4, 7);
    let mut prev: Option<mfchaos::transport::MnEstimate> = None;
    for n in [8, 32, 128] {
        let e = estimate_mn(&space, n, &cands, 1000, 21).unwrap();
        if let Some(p) = prev {
            assert!(e.value < p.value + 3.0 * (e.stderr + p.stderr), "M̂ rose from {} to {}", p.value, e.value);
        }
        prev = Some(e);
    }
}

#[test]
fn estimates_are_reproducible() {
    let space = FiniteMetricSpace::line(4);
    let c = default_candidates(4, 1);
    let a = estimate_mn(&space, 40, &c, 300, 99).unwrap();
    let b = estimate_mn(&space, 40, &c, 300, 99).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.per_candidate, b.per_candidate);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn discrete_w1_is_total_variation(a in prop::collection::vec(0.0f64..1.0, 5), b in prop::collection::vec(0.0f64..1.0, 5)) {
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        prop_assume!(sa > 1e-3 && sb > 1e-3);
        let mu = Measure::new(a.iter().map(|v| v / sa).collect()).unwrap();
        let nu = Measure::new(b.iter().map(|v| v / sb).collect()).unwrap();
        let tv = 0.5 * mu.weights().iter().zip(nu.weights()).map(|(x, y)| (x - y).abs()).sum::<f64>();
        let d = FiniteMetricSpace::discrete(5);
        prop_assert!((wasserstein1(&d, &mu, &nu).unwrap().0 - tv).abs() <= 1e-12);
    }

    #[test]
    fn w1_is_a_metric(seed in 0u64..10_000) {
        let mut r = rng::substream(seed, 3, 0);
        let n = 2 + (seed as usize % 5);
        let space = random_metric(n, &mut r);
        let (x, y, z) = (random_measure(n, &mut r), random_measure(n, &mut r), random_measure(n, &mut r));
        let w = |a: &Measure, b: &Measure| wasserstein1(&space, a, b).unwrap().0;
        prop_assert!((w(&x, &y) - w(&y, &x)).abs() <= 1e-9);
        prop_assert!(w(&x, &x) <= 1e-9);
        prop_assert!(w(&x, &z) <= w(&x, &y) + w(&y, &z) + 1e-9);
    }
}
