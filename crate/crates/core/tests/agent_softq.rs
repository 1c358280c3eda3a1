mod common;

use common::*;
use offdyn::agent::soft_value_iteration;
use offdyn::env::{Kernel, TabularMdp};

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn tabular_soft_q_matches_value_iteration_on_acyclic_mdps() {
    for (name, mdp) in hand_built_mdps() {
        for (alpha, gamma) in [(0.5, 0.9), (1.5, 1.0), (0.1, 0.95)] {
            let exact = soft_value_iteration(&mdp, alpha, gamma).unwrap();
            let q = soft_q_learning(&mdp, alpha, gamma, 0.5, 200, 1);
            let gap = max_gap(&q, &exact.q);
            assert!(gap < 1e-3, "{name} alpha {alpha} gamma {gamma}: {gap}");
        }
    }
}

#[test]
fn soft_values_by_hand_on_two_step_tree() {
    // root: two actions to leaves; each leaf ends with reward 1 or 3
    let mdp = deterministic_mdp(3, 2, 2, |s, a| match s {
        0 => (1 + a, 0.0, false),
        _ => (s, if s == 1 { 1.0 } else { 3.0 } + a as f64, true),
    });
    let (alpha, gamma) = (0.7, 0.9);
    let sol = soft_value_iteration(&mdp, alpha, gamma).unwrap();
    let lse = |x: f64, y: f64| alpha * ((x / alpha).exp() + (y / alpha).exp()).ln();
    let v1 = lse(1.0, 2.0);
    let v2 = lse(3.0, 4.0);
    assert!((sol.q_row(0)[0] - gamma * v1).abs() < 1e-12);
    assert!((sol.q_row(0)[1] - gamma * v2).abs() < 1e-12);
    assert!((sol.v[0] - lse(gamma * v1, gamma * v2)).abs() < 1e-12);
    let p1 = sol.policy_row(0)[1];
    let want = 1.0 / (1.0 + ((gamma * v1 - gamma * v2) / alpha).exp());
    assert!((p1 - want).abs() < 1e-12);
}

#[test]
fn stochastic_tree_converges_near_value_iteration() {
    // each action reaches its child with 0.7, the sibling with 0.3
    let n = 15;
    let mut probs = vec![0.0; n * 2 * n];
    for s in 0..n {
        for a in 0..2 {
            if s < 7 {
                probs[(s * 2 + a) * n + 2 * s + 1 + a] = 0.7;
                probs[(s * 2 + a) * n + 2 * s + 2 - a] = 0.3;
            } else {
                probs[(s * 2 + a) * n + s] = 1.0;
            }
        }
    }
    let mut mdp = TabularMdp::new(Kernel::from_flat(n, 2, probs).unwrap(), 4);
    for s in 0..n {
        for a in 0..2 {
            for next in 0..n {
                let i = mdp.index(s, a, next);
                mdp.reward[i] = ((s * 5 + next * 3 + a) % 7) as f64 * 0.5 - 1.0;
                mdp.terminal[i] = s >= 7;
            }
        }
    }
    let exact = soft_value_iteration(&mdp, 1.0, 0.9).unwrap();
    let q = soft_q_learning(&mdp, 1.0, 0.9, 0.01, 3000, 10);
    let gap = max_gap(&q, &exact.q);
    assert!(gap < 0.05, "{gap}");
}

#[test]
fn greedy_policy_of_exact_solution_is_optimal_at_low_temperature() {
    for (name, mdp) in hand_built_mdps() {
        let sol = soft_value_iteration(&mdp, 1e-3, 1.0).unwrap();
        let soft = mdp.policy_return(&sol.policy_table());
        // exhaustive search over deterministic policies is too large, so
        // compare with hard backward induction instead
        let mut v = vec![0.0; mdp.n_states()];
        for _ in 0..mdp.horizon {
            let mut nv = vec![f64::NEG_INFINITY; mdp.n_states()];
            for (s, slot) in nv.iter_mut().enumerate() {
                for a in 0..mdp.n_actions() {
                    let q: f64 = (0..mdp.n_states())
                        .map(|n| {
                            let i = mdp.index(s, a, n);
                            let p = mdp.kernel.prob(s, a, n);
                            if p == 0.0 {
                                0.0
                            } else {
                                p * (mdp.reward[i] + if mdp.terminal[i] { 0.0 } else { v[n] })
                            }
                        })
                        .sum();
                    *slot = slot.max(q);
                }
            }
            v = nv;
        }
        let best: f64 = mdp.start.iter().zip(&v).map(|(p, x)| p * x).sum();
        assert!((soft - best).abs() < 1e-2, "{name}: {soft} vs {best}");
    }
}
