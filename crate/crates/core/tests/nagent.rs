mod common;

use std::sync::Arc;

use common::*;
use mfchaos::cmkv::{value_iteration, KernelFamily, SimplexGrid};
use mfchaos::nagent::{
    bellman_tn, bellman_tn_action, bellman_tn_policy, evaluate_policy, mc_gain_n, reward_joint, solve_vn,
    solve_vn_unreduced, step_joint, ClassIndex, ConstantPolicy, Layout, NAgentValueTable, StatewisePolicy,
};
use mfchaos::{rng, NoiseSpec, TransitionRule};
use rand::Rng;

/// Threshold rule of the reference family, written against the raw state
/// vector instead of the empirical measure.
fn threshold_next(x: &[usize], a: usize, e: usize, e0: usize, n_idio: usize, levels: &[f64]) -> usize {
    let m1 = x.iter().filter(|&&s| s == 1).count() as f64 / x.len() as f64;
    let shift = levels.get(e0).copied().unwrap_or(0.0);
    let thr = (m1 + 0.3 * a as f64 + 0.1 * shift).clamp(0.0, 1.0);
    usize::from((e as f64 + 0.5) / (n_idio as f64) < thr)
}

fn random_states<R: Rng>(r: &mut R, n: usize) -> Vec<usize> {
    (0..n).map(|_| r.random_range(0..2)).collect()
}

/// Every vector in `{0..base}^len`, first coordinate most significant.
fn tuples(len: usize, base: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out.into_iter().flat_map(|t| (0..base).map(move |v| [t.clone(), vec![v]].concat())).collect();
    }
    out
}

#[test]
fn step_joint_matches_scalar_rule() {
    let model = reference();
    let mut r = rng::substream(1, 0, 0);
    for _ in 0..500 {
        let n = r.random_range(1..7);
        let x = random_states(&mut r, n);
        let a = random_states(&mut r, n);
        let e: Vec<usize> = (0..n).map(|_| r.random_range(0..4)).collect();
        let e0 = r.random_range(0..2);
        let oracle: Vec<usize> = (0..n).map(|i| threshold_next(&x, a[i], e[i], e0, 4, &[-1.0, 1.0])).collect();
        assert_eq!(step_joint(&model, &x, &a, &e, e0).unwrap(), oracle);
    }
}

#[test]
fn step_joint_rejects_bad_input() {
    let model = reference();
    assert!(step_joint(&model, &[0, 1], &[0], &[0, 0], 0).is_err());
    assert!(step_joint(&model, &[0, 2], &[0, 0], &[0, 0], 0).is_err());
    assert!(step_joint(&model, &[0, 1], &[0, 0], &[0, 4], 0).is_err());
    assert!(step_joint(&model, &[0, 1], &[0, 0], &[0, 0], 2).is_err());
}

#[test]
fn reward_joint_by_hand() {
    let model = reference();
    assert!((reward_joint(&model, &[1, 0, 1], &[1, 1, 0]).unwrap() - (0.8 - 0.2 + 1.0) / 3.0).abs() < 1e-15);
    assert_eq!(reward_joint(&model, &[0, 0], &[0, 0]).unwrap(), 0.0);
    assert!(reward_joint(&model, &[0], &[2]).is_err());
}

#[test]
fn bellman_action_matches_enumeration() {
    let levels = [-1.0, 1.0];
    let model = influence(3, levels.to_vec(), linear_cost(), 0.5);
    let idx = ClassIndex::new(2, 2);
    let mut r = rng::substream(2, 0, 0);
    for _ in 0..20 {
        let values: Vec<f64> = (0..idx.len()).map(|_| r.random::<f64>() * 2.0).collect();
        let w = NAgentValueTable::from_classes(2, 2, values.clone()).unwrap();
        let ones = |x: &[usize]| values[idx.index_of_counts(&[x.len() - x.iter().sum::<usize>(), x.iter().sum()])];
        for x in tuples(2, 2) {
            for a in tuples(2, 2) {
                let reward: f64 = x.iter().zip(&a).map(|(&s, &b)| s as f64 - 0.2 * b as f64).sum::<f64>() / 2.0;
                let mut cont = 0.0;
                for e0 in 0..2 {
                    for e in tuples(2, 3) {
                        let next: Vec<usize> = (0..2).map(|i| threshold_next(&x, a[i], e[i], e0, 3, &levels)).collect();
                        cont += 0.5 / 9.0 * ones(&next);
                    }
                }
                let got = bellman_tn_action(&model, &w, &x, &a).unwrap();
                assert!((got - (reward + 0.5 * cont)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn constant_reward_value() {
    let model = constant_reward(0.7, 0.5);
    for n in [1, 3, 5] {
        let sol = solve_vn(&model, n, 1e-10).unwrap();
        assert!(sol.table.values.iter().all(|v| (v - 1.4).abs() < 1e-9));
    }
}

#[test]
fn single_agent_matches_point_mass_mean_field() {
    // one idiosyncratic level and no common noise: point masses stay point
    // masses under a deterministic kernel, so N = 1 is the mean-field
    // problem restricted to vertices
    let model = binary(NoiseSpec::uniform(1, 1), threshold(0.3, 0.0, vec![]), linear_cost(), 0.5);
    let vn = solve_vn(&model, 1, 1e-10).unwrap();
    let mf = value_iteration(&model, Arc::new(SimplexGrid::new(2, 4).unwrap()), KernelFamily::Deterministic, 1e-10).unwrap();
    for s in 0..2 {
        let v = mf.table.evaluate(&m(&[1.0 - s as f64, s as f64])).unwrap();
        assert!((vn.table.value(&[s]) - v).abs() < 1e-8, "state {s}");
    }
}

#[test]
fn reduced_matches_unreduced() {
    let model = reference();
    for n in [2, 3] {
        let reduced = solve_vn(&model, n, 1e-10).unwrap();
        let full = solve_vn_unreduced(&model, n, 1e-10).unwrap();
        assert_eq!(full.layout, Layout::Full);
        for x in tuples(n, 2) {
            assert!((reduced.table.value(&x) - full.value(&x)).abs() < 1e-8, "{x:?}");
        }
    }
}

#[test]
fn values_are_permutation_invariant() {
    let model = reference();
    let full = solve_vn_unreduced(&model, 3, 1e-10).unwrap();
    for x in tuples(3, 2) {
        for perm in [[1, 0, 2], [2, 1, 0], [1, 2, 0]] {
            let y: Vec<usize> = perm.iter().map(|&i| x[i]).collect();
            assert!((full.value(&x) - full.value(&y)).abs() < 1e-12);
        }
    }
}

/// Value of a constant joint action on two agents by solving `(I − βP) v = r`.
fn constant_policy_oracle(a: &[usize]) -> Vec<f64> {
    let states = tuples(2, 2);
    let k = states.len();
    let mut mat = vec![vec![0.0; k + 1]; k];
    for (i, x) in states.iter().enumerate() {
        mat[i][i] += 1.0;
        mat[i][k] = x.iter().zip(a).map(|(&s, &b)| s as f64 - 0.2 * b as f64).sum::<f64>() / 2.0;
        for e0 in 0..2 {
            for e in tuples(2, 4) {
                let next: Vec<usize> = (0..2).map(|j| threshold_next(x, a[j], e[j], e0, 4, &[-1.0, 1.0])).collect();
                let col = next[0] * 2 + next[1];
                mat[i][col] -= 0.5 * 0.5 / 16.0;
            }
        }
    }
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| mat[i][c].abs().total_cmp(&mat[j][c].abs())).unwrap();
        mat.swap(c, p);
        for i in 0..k {
            if i != c {
                let f = mat[i][c] / mat[c][c];
                for j in c..=k {
                    mat[i][j] -= f * mat[c][j];
                }
            }
        }
    }
    (0..k).map(|i| mat[i][k] / mat[i][i]).collect()
}

#[test]
fn constant_policy_evaluation_matches_linear_solve() {
    let model = reference();
    for a in tuples(2, 2) {
        let ev = evaluate_policy(&model, 2, &ConstantPolicy(a.clone()), 1e-12).unwrap();
        let oracle = constant_policy_oracle(&a);
        for (x, v) in tuples(2, 2).iter().zip(&oracle) {
            assert!((ev.table.value(x) - v).abs() < 1e-10);
        }
        let again = bellman_tn_policy(&model, &ev.table, &ConstantPolicy(a)).unwrap();
        assert!(again.sup_distance(&ev.table) <= 1e-11);
    }
}

#[test]
fn policy_operator_on_zero_is_the_reward() {
    let model = reference();
    let zero = NAgentValueTable::constant_classes(3, 2, 0.0);
    let pol = ConstantPolicy(vec![1, 0, 1]);
    let t = bellman_tn_policy(&model, &zero, &pol).unwrap();
    for x in tuples(3, 2) {
        assert!((t.value(&x) - reward_joint(&model, &x, &[1, 0, 1]).unwrap()).abs() < 1e-15);
    }
}

#[test]
fn mc_gain_examples() {
    let c = constant_reward(2.0, 0.5);
    let g = mc_gain_n(&c, &ConstantPolicy(vec![0, 1, 1]), &[0, 1, 0], 12, 50, 4).unwrap();
    assert!((g.mean - 2.0 * (1.0 - 0.5f64.powi(12)) / 0.5).abs() < 1e-12);
    assert_eq!(g.stderr, 0.0);

    let model = reference();
    let pol = StatewisePolicy { rows: vec![vec![0.3, 0.7], vec![0.6, 0.4]] };
    let a = mc_gain_n(&model, &pol, &[0, 1, 1, 0], 30, 500, 9).unwrap();
    let b = mc_gain_n(&model, &pol, &[0, 1, 1, 0], 30, 500, 9).unwrap();
    assert_eq!(a, b);
    let c = mc_gain_n(&model, &pol, &[0, 1, 1, 0], 30, 500, 10).unwrap();
    assert_ne!(a.mean, c.mean);
}

#[test]
fn mc_gain_agrees_with_exact_evaluation() {
    let model = reference();
    let pol = StatewisePolicy { rows: vec![vec![0.3, 0.7], vec![0.6, 0.4]] };
    let exact = evaluate_policy(&model, 4, &pol, 1e-10).unwrap();
    for x0 in [vec![0, 0, 0, 0], vec![0, 1, 1, 0], vec![1, 1, 1, 1]] {
        let g = mc_gain_n(&model, &pol, &x0, 40, 20_000, 3).unwrap();
        let v = exact.table.value(&x0);
        assert!((g.mean - v).abs() <= 3.0 * g.stderr + g.truncation_bias + 1e-9, "{x0:?}: {} vs {v}", g.mean);
    }
}

#[test]
fn optimal_operator_contracts_and_is_monotone() {
    let model = reference();
    let idx = ClassIndex::new(5, 2);
    let mut r = rng::substream(3, 0, 0);
    for _ in 0..20 {
        let w1: Vec<f64> = (0..idx.len()).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
        let w2: Vec<f64> = w1.iter().map(|v| v + r.random::<f64>()).collect();
        let (w1, w2) = (
            NAgentValueTable::from_classes(5, 2, w1).unwrap(),
            NAgentValueTable::from_classes(5, 2, w2).unwrap(),
        );
        let (t1, t2) = (bellman_tn(&model, &w1).unwrap(), bellman_tn(&model, &w2).unwrap());
        assert!(t1.sup_distance(&t2) <= 0.5 * w1.sup_distance(&w2) + 1e-12);
        assert!(t1.values.iter().zip(&t2.values).all(|(a, b)| a <= &(b + 1e-12)));
    }
}

#[test]
fn optimum_dominates_every_constant_policy() {
    let model = reference();
    let sol = solve_vn(&model, 2, 1e-10).unwrap();
    for a in tuples(2, 2) {
        let ev = evaluate_policy(&model, 2, &ConstantPolicy(a), 1e-10).unwrap();
        for x in tuples(2, 2) {
            assert!(ev.table.value(&x) <= sol.table.value(&x) + 1e-8);
        }
    }
}

#[test]
fn identity_dynamics_are_myopic() {
    // with F = x the state never moves: V = max_a r / (1 − β)
    let model = binary(NoiseSpec::uniform(2, 1), TransitionRule::Identity, linear_cost(), 0.5);
    let sol = solve_vn(&model, 3, 1e-10).unwrap();
    for x in tuples(3, 2) {
        let ones = x.iter().sum::<usize>() as f64;
        assert!((sol.table.value(&x) - ones / 3.0 / 0.5).abs() < 1e-8);
    }
}
