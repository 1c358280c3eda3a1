mod common;

use common::max_rel_error;
use offdyn::nn::{Activation, Head, Loss, Mlp};
use offdyn::seed;
use proptest::prelude::*;
use rand::Rng;

fn random_input(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect()
}

fn check(widths: &[usize], act: Activation, head: Head, loss: Loss, seed: u64) -> f64 {
    let mut rng = seed::rng(seed);
    let net = Mlp::new(widths, act, head, &mut rng).unwrap();
    let x = random_input(widths[0], &mut rng);
    max_rel_error(&net, &x, &loss)
}

#[test]
fn bce_sigmoid_head() {
    for label in [0.0, 1.0, 0.3] {
        for act in [Activation::Tanh, Activation::Relu] {
            let e = check(&[4, 6, 5, 1], act, Head::Sigmoid, Loss::BinaryCrossEntropy { label, weight: 0.7 }, 11);
            assert!(e < 1e-4, "bce {act:?} label {label}: {e}");
        }
    }
}

#[test]
fn squared_error_every_head() {
    let cases = [
        (Head::Linear, 3, 2),
        (Head::LogitsVector, 4, 3),
        (Head::Sigmoid, 1, 0),
    ];
    for (head, out, index) in cases {
        for act in [Activation::Tanh, Activation::Relu] {
            let loss = Loss::SquaredError {
                index,
                target: 0.4,
                weight: 1.3,
            };
            let e = check(&[5, 8, out], act, head, loss, 23);
            assert!(e < 1e-4, "squared error {head:?} {act:?}: {e}");
        }
    }
}

#[test]
fn weighted_log_prob() {
    for action in 0..4 {
        let loss = Loss::LogProbWeighted { action, weight: -2.0 };
        let e = check(&[3, 7, 7, 4], Activation::Tanh, Head::LogitsVector, loss, 5 + action as u64);
        assert!(e < 1e-4, "log-prob action {action}: {e}");
    }
}

#[test]
fn one_hot_inputs_skip_zero_columns_correctly() {
    let mut rng = seed::rng(3);
    let net = Mlp::new(&[6, 4, 1], Activation::Tanh, Head::Sigmoid, &mut rng).unwrap();
    let x = [0.0, 1.0, 0.0, 0.0, 1.0, 0.0];
    let loss = Loss::BinaryCrossEntropy { label: 1.0, weight: 1.0 };
    assert!(max_rel_error(&net, &x, &loss) < 1e-4);
    let (_, g) = net.grad(&x, &loss).unwrap();
    // first-layer weights fed by a zero input get no gradient
    assert!(g.0[..4].iter().all(|v| *v == 0.0));
}

fn head_and_loss() -> impl Strategy<Value = (Head, usize, Loss)> {
    prop_oneof![
        (0.0..=1.0f64, 0.1..3.0f64).prop_map(|(label, weight)| (
            Head::Sigmoid,
            1,
            Loss::BinaryCrossEntropy { label, weight }
        )),
        (1usize..5, -2.0..2.0f64, 0.1..3.0f64).prop_map(|(out, target, weight)| (
            Head::Linear,
            out,
            Loss::SquaredError {
                index: out - 1,
                target,
                weight
            }
        )),
        (2usize..6, -2.0..2.0f64).prop_map(|(out, weight)| (
            Head::LogitsVector,
            out,
            Loss::LogProbWeighted { action: 0, weight }
        )),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_tanh_networks_pass_gradient_check(
        seed in 0u64..10_000,
        input in 1usize..6,
        hidden in proptest::collection::vec(1usize..8, 0..3),
        (head, out, loss) in head_and_loss(),
    ) {
        let mut widths = vec![input];
        widths.extend(hidden);
        widths.push(out);
        let e = check(&widths, Activation::Tanh, head, loss, seed);
        prop_assert!(e < 1e-4, "widths {:?}: {}", widths, e);
    }
}
