#![allow(dead_code)]

use offdyn::nn::{Loss, Mlp};
use offdyn::env::{Domain, EnvPair, EnvSpec, Environment, Features, GridSpec, Kernel, MoveSet, ShiftConfig, TabularMdp, Transition};
use offdyn::ratio::DomainClassifier;
use offdyn::replay::ReplayBuffer;
use rand::Rng;

/// 5x5 compass grid with a windy middle band, source actuator 0 broken.
pub fn windy_spec() -> GridSpec {
    GridSpec {
        moves: MoveSet::Compass,
        wind_prob: 0.3,
        windy_rows: Some(vec![1, 2, 3]),
        ..GridSpec::default()
    }
}

pub fn broken_source_pair(grid: GridSpec, p_f: f64) -> EnvPair {
    EnvPair::new(EnvSpec::WindyGrid(grid), ShiftConfig::broken(0, p_f), ShiftConfig::none()).unwrap()
}

pub fn state_of_index(features: &Features, s: usize) -> Vec<f64> {
    match features.state {
        offdyn::env::StateEncoding::OneHot { width, .. } => vec![(s % width) as f64, (s / width) as f64],
        _ => panic!("tabular features only"),
    }
}

/// Bayes-optimal domain posteriors for a balanced mixture in which the
/// source draws `(s, a)` from `mu_src` and the target from `mu_trg`.
pub struct AnalyticClassifier {
    pub features: Features,
    pub src: Kernel,
    pub trg: Kernel,
    pub mu_src: Vec<f64>,
    pub mu_trg: Vec<f64>,
}

impl AnalyticClassifier {
    fn sa_index(&self, s: &[f64], a: usize) -> usize {
        self.features.state_index(s).unwrap() * self.features.n_actions + a
    }
}

impl DomainClassifier for AnalyticClassifier {
    fn p_trg_sa(&self, s: &[f64], a: usize) -> f64 {
        let i = self.sa_index(s, a);
        self.mu_trg[i] / (self.mu_src[i] + self.mu_trg[i])
    }

    fn p_trg_sas(&self, s: &[f64], a: usize, next: &[f64]) -> f64 {
        let i = self.sa_index(s, a);
        let si = self.features.state_index(s).unwrap();
        let ni = self.features.state_index(next).unwrap();
        let src = self.mu_src[i] * self.src.prob(si, a, ni);
        let trg = self.mu_trg[i] * self.trg.prob(si, a, ni);
        trg / (src + trg)
    }
}

/// Normalized occupancy of `(s, a, s')` under the uniform policy, indexed
/// like `TabularMdp::index`.
pub fn uniform_occupancy(mdp: &TabularMdp) -> Vec<f64> {
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let mut occ = vec![0.0; n * na * n];
    let mut dist = mdp.start.clone();
    for _ in 0..mdp.horizon {
        let mut next = vec![0.0; n];
        for s in 0..n {
            if dist[s] == 0.0 {
                continue;
            }
            for a in 0..na {
                for s2 in 0..n {
                    let p = mdp.kernel.prob(s, a, s2);
                    if p == 0.0 {
                        continue;
                    }
                    let i = mdp.index(s, a, s2);
                    let w = dist[s] * p / na as f64;
                    occ[i] += w;
                    if !mdp.terminal[i] {
                        next[s2] += w;
                    }
                }
            }
        }
        dist = next;
    }
    let total: f64 = occ.iter().sum();
    occ.iter_mut().for_each(|v| *v /= total);
    occ
}

/// `n` transitions of the uniform policy in `env`.
pub fn collect_uniform(env: &Environment, n: usize, rng: &mut impl Rng) -> Vec<Transition> {
    let mut env = env.clone();
    let mut out = Vec::with_capacity(n);
    let mut s = env.reset(rng);
    let mut t = 0;
    while out.len() < n {
        let a = rng.random_range(0..env.n_actions());
        let step = env.step(&s, a, rng);
        out.push(
            Transition::new(s.clone(), a, step.next_state.clone(), step.reward, step.terminal, step.done, env.domain())
                .at_step(t),
        );
        if step.done {
            s = env.reset(rng);
            t = 0;
        } else {
            s = step.next_state;
            t += 1;
        }
    }
    out
}

pub fn buffer_of(transitions: Vec<Transition>, domain: Domain) -> ReplayBuffer {
    let mut buf = ReplayBuffer::new(transitions.len().max(1), domain).unwrap();
    for t in transitions {
        buf.push(t);
    }
    buf
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Tabular features for an abstract MDP with `n` states: state `s` is
/// encoded as the cell `(s, 0)` of an `n x 1` grid.
pub fn abstract_features(n: usize, n_actions: usize) -> Features {
    Features {
        state: offdyn::env::StateEncoding::OneHot { width: n, n },
        n_actions,
    }
}

/// Deterministic MDP from `(s, a) -> (next, reward, terminal)`.
pub fn deterministic_mdp(n: usize, na: usize, horizon: usize, f: impl Fn(usize, usize) -> (usize, f64, bool)) -> TabularMdp {
    let mut probs = vec![0.0; n * na * n];
    for s in 0..n {
        for a in 0..na {
            probs[(s * na + a) * n + f(s, a).0] = 1.0;
        }
    }
    let mut mdp = TabularMdp::new(Kernel::from_flat(n, na, probs).unwrap(), horizon);
    for s in 0..n {
        for a in 0..na {
            let (next, r, term) = f(s, a);
            let i = mdp.index(s, a, next);
            mdp.reward[i] = r;
            mdp.terminal[i] = term;
        }
    }
    mdp
}

/// Three acyclic hand-built MDPs (at most 25 states, horizon at most 10).
pub fn hand_built_mdps() -> Vec<(&'static str, TabularMdp)> {
    let tree = deterministic_mdp(15, 2, 4, |s, a| {
        let r = ((s * 7 + a * 3) % 5) as f64 - 2.0;
        if s < 7 {
            (2 * s + 1 + a, r, false)
        } else {
            (s, r + 1.5, true)
        }
    });
    let chain = deterministic_mdp(10, 3, 10, |s, a| match a {
        _ if s == 9 => (9, 0.0, true),
        0 => (s + 1, -0.5, s + 1 == 9),
        1 => ((s + 2).min(9), -1.2 + 0.1 * s as f64, s + 2 >= 9),
        _ => (s, 0.3 * s as f64 - 2.0, true),
    });
    // 5x5 lattice walked toward the far corner; leaving the lattice ends it
    let lattice = deterministic_mdp(25, 2, 10, |s, a| {
        let (x, y) = (s % 5, s / 5);
        let r = -1.0 + 0.4 * (((x + 2 * y + a) % 3) as f64);
        if s == 24 {
            return (24, 0.0, true);
        }
        match a {
            0 if x < 4 => (s + 1, r, s + 1 == 24),
            1 if y < 4 => (s + 5, r, s + 5 == 24),
            _ => (s, r - 3.0, true),
        }
    });
    vec![("binary tree", tree), ("chain", chain), ("lattice", lattice)]
}

/// Run tabular soft Q-learning with full sweeps over every `(s, a, s')`
/// with positive probability; `copies` repeats each triple in proportion
/// to its probability (rounded to `1/copies`).
pub fn soft_q_learning(mdp: &TabularMdp, alpha: f64, gamma: f64, lr: f64, sweeps: usize, copies: usize) -> Vec<f64> {
    use offdyn::agent::{Agent, AgentConfig, RewardProvider, Weighting};
    use offdyn::replay::Sampled;
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let features = abstract_features(n, na);
    let config = AgentConfig {
        alpha,
        gamma,
        lr,
        target_sync: 1,
        ..AgentConfig::default()
    };
    let mut agent = Agent::new(features, config, &mut offdyn::seed::rng(0)).unwrap();
    let mut transitions = Vec::new();
    for s in 0..n {
        for a in 0..na {
            for s2 in 0..n {
                let p = mdp.kernel.prob(s, a, s2);
                if p == 0.0 {
                    continue;
                }
                let i = mdp.index(s, a, s2);
                let k = (p * copies as f64).round() as usize;
                for _ in 0..k {
                    transitions.push(Transition::new(
                        vec![s as f64, 0.0],
                        a,
                        vec![s2 as f64, 0.0],
                        mdp.reward[i],
                        mdp.terminal[i],
                        mdp.terminal[i],
                        Domain::Src,
                    ));
                }
            }
        }
    }
    for _ in 0..sweeps {
        let batch: Vec<Sampled> = transitions.iter().map(Sampled::single).collect();
        agent.update(&batch, &RewardProvider::GroundTruth, Weighting::None).unwrap();
    }
    agent.q_table().unwrap().to_vec()
}

pub const H: f64 = 1e-5;

/// Central differences of the loss with respect to every parameter.
pub fn numeric_grad(net: &Mlp, x: &[f64], loss: &Loss) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.params().len())
        .map(|i| {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + H;
            let up = probe.grad(x, loss).unwrap().0;
            probe.params_mut()[i] = orig - H;
            let down = probe.grad(x, loss).unwrap().0;
            probe.params_mut()[i] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

pub fn max_rel_error(net: &Mlp, x: &[f64], loss: &Loss) -> f64 {
    let (_, analytic) = net.grad(x, loss).unwrap();
    let numeric = numeric_grad(net, x, loss);
    analytic
        .0
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-4))
        .fold(0.0, f64::max)
}
