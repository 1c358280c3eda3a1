//! Maximum-entropy soft Q-learning over discrete actions.
//!
//! The policy is `π(a|s) = softmax(Q(s,·)/α)` and the soft state value is
//! `V(s) = α log Σ_a exp(Q(s,a)/α)`. Tabular agents keep a Q-table; neural
//! agents an MLP with one output per action. Both bootstrap from a target
//! copy that is hard-synced every `target_sync` updates.

mod reward;
mod soft_vi;

pub use reward::{clipped_weight, RewardProvider};
pub use soft_vi::{soft_max_value, soft_policy, soft_value_iteration, soft_value_iteration_env, SoftSolution};

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, Features};
use crate::nn::{Activation, Adam, Gradients, Head, Loss, Mlp};
use crate::ratio::{ClipBounds, DomainClassifier};
use crate::replay::Sampled;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    Tabular,
    Neural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Entropy temperature.
    pub alpha: f64,
    pub gamma: f64,
    pub lr: f64,
    pub target_sync: u64,
    pub batch_size: usize,
    /// Episodes acted uniformly at random before the policy is used.
    pub exploration_episodes: usize,
    pub representation: RepresentationKind,
    /// Hidden widths of the neural Q-network.
    pub hidden: Vec<usize>,
    /// Gradient updates per environment step.
    pub updates_per_step: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            alpha: 0.1,
            gamma: 0.99,
            lr: 0.1,
            target_sync: 100,
            batch_size: 32,
            exploration_episodes: 10,
            representation: RepresentationKind::Tabular,
            hidden: vec![64, 64],
            updates_per_step: 1,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("agent lr must be positive, got {}", self.lr)));
        }
        if self.target_sync == 0 || self.batch_size == 0 || self.updates_per_step == 0 {
            return Err(Error::Config(
                "target_sync, batch_size and updates_per_step must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("agent hidden widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActMode {
    Sample,
    Greedy,
}

/// Per-sample scaling of the squared TD error.
#[derive(Clone, Copy)]
pub enum Weighting<'a> {
    None,
    /// Multiply each sample's squared TD error by its clipped `ρ`.
    IsAcl {
        ratio: Option<&'a dyn DomainClassifier>,
        clip: ClipBounds,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Repr {
    Tabular { q: Vec<f64>, target: Vec<f64> },
    Neural { q: Mlp, target: Mlp, opt: Adam },
}

/// Mean and standard error of episodic returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean: f64,
    pub stderr: f64,
    pub returns: Vec<f64>,
}

impl Evaluation {
    pub fn from_returns(returns: Vec<f64>) -> Self {
        let (mean, stderr) = mean_stderr(&returns);
        Evaluation { mean, stderr, returns }
    }
}

/// Sample mean and standard error (0 for fewer than two values).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Agent {
    config: AgentConfig,
    features: Features,
    n_actions: usize,
    repr: Repr,
    updates: u64,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(features: Features, config: AgentConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let n_actions = features.n_actions;
        let repr = match config.representation {
            RepresentationKind::Tabular => {
                let n = features.n_states().ok_or_else(|| {
                    Error::Config("tabular agent requires a discrete (grid) state space".into())
                })?;
                Repr::Tabular {
                    q: vec![0.0; n * n_actions],
                    target: vec![0.0; n * n_actions],
                }
            }
            RepresentationKind::Neural => {
                let mut widths = vec![features.state_dim()];
                widths.extend(&config.hidden);
                widths.push(n_actions);
                let q = Mlp::new(&widths, Activation::Relu, Head::LogitsVector, rng)?;
                Repr::Neural {
                    opt: Adam::for_net(config.lr, &q),
                    target: q.clone(),
                    q,
                }
            }
        };
        Ok(Agent {
            config,
            features,
            n_actions,
            repr,
            updates: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn tabular_index(&self, s: &[f64]) -> usize {
        self.features.state_index(s).expect("tabular agent on a grid state") * self.n_actions
    }

    fn row(&self, s: &[f64], target: bool) -> Vec<f64> {
        match &self.repr {
            Repr::Tabular { q, target: tq } => {
                let i = self.tabular_index(s);
                let table = if target { tq } else { q };
                table[i..i + self.n_actions].to_vec()
            }
            Repr::Neural { q, target: tq, .. } => {
                let net = if target { tq } else { q };
                net.forward(&self.features.state(s)).expect("q-network input width")
            }
        }
    }

    pub fn q_values(&self, s: &[f64]) -> Vec<f64> {
        self.row(s, false)
    }

    pub fn policy(&self, s: &[f64]) -> Vec<f64> {
        soft_policy(&self.q_values(s), self.config.alpha)
    }

    pub fn soft_value(&self, s: &[f64]) -> f64 {
        soft_max_value(&self.q_values(s), self.config.alpha)
    }

    /// Overwrite a tabular Q-table (both online and target copies).
    pub fn set_q_table(&mut self, table: Vec<f64>) -> Result<()> {
        match &mut self.repr {
            Repr::Tabular { q, target } => {
                if table.len() != q.len() {
                    return Err(Error::Shape {
                        expected: q.len(),
                        got: table.len(),
                    });
                }
                *q = table.clone();
                *target = table;
                Ok(())
            }
            Repr::Neural { .. } => Err(Error::Unsupported("set_q_table on a neural agent".into())),
        }
    }

    pub fn q_table(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Tabular { q, .. } => Some(q),
            Repr::Neural { .. } => None,
        }
    }

    /// Policy row per tabular state, for exact evaluation.
    pub fn policy_table(&self, mode: ActMode) -> Option<Vec<Vec<f64>>> {
        let q = self.q_table()?;
        Some(
            q.chunks(self.n_actions)
                .map(|row| match mode {
                    ActMode::Sample => soft_policy(row, self.config.alpha),
                    ActMode::Greedy => {
                        let mut p = vec![0.0; row.len()];
                        p[argmax(row)] = 1.0;
                        p
                    }
                })
                .collect(),
        )
    }

    pub fn act<R: Rng + ?Sized>(&self, s: &[f64], mode: ActMode, rng: &mut R) -> usize {
        let q = self.q_values(s);
        match mode {
            ActMode::Greedy => argmax(&q),
            ActMode::Sample => sample_index(&soft_policy(&q, self.config.alpha), rng),
        }
    }

    pub fn act_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.n_actions)
    }

    /// One soft-Q update on a batch; returns the pre-update mean weighted
    /// squared TD error.
    pub fn update(&mut self, batch: &[Sampled<'_>], provider: &RewardProvider<'_>, weighting: Weighting<'_>) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let alpha = self.config.alpha;
        let gamma = self.config.gamma;
        let mut rewards = Vec::with_capacity(batch.len());
        let mut weights = Vec::with_capacity(batch.len());
        let mut targets = Vec::with_capacity(batch.len());
        for item in batch {
            let t = item.transition;
            let r = provider.reward(t, &item.history);
            let w = match weighting {
                Weighting::None => 1.0,
                Weighting::IsAcl { ratio, clip } => clipped_weight(ratio, t, &item.history, clip),
            };
            let y = if t.terminal {
                r
            } else {
                r + gamma * soft_max_value(&self.row(&t.next_state, true), alpha)
            };
            rewards.push(r);
            weights.push(w);
            targets.push(y);
        }
        let inv = 1.0 / batch.len() as f64;
        let loss = match &mut self.repr {
            Repr::Tabular { q, .. } => {
                let lr = self.config.lr;
                let mut loss = 0.0;
                for ((item, y), w) in batch.iter().zip(&targets).zip(&weights) {
                    let t = item.transition;
                    let i = self.features.state_index(&t.state).expect("grid state") * self.n_actions + t.action;
                    let td = y - q[i];
                    loss += inv * w * td * td;
                    // a step beyond the target would overshoot
                    q[i] += (lr * w).min(1.0) * td;
                }
                loss
            }
            Repr::Neural { q, opt, .. } => {
                let mut grads = Gradients::zeros_like(q);
                let mut loss = 0.0;
                for ((item, y), w) in batch.iter().zip(&targets).zip(&weights) {
                    let t = item.transition;
                    let x = self.features.state(&t.state);
                    let l = Loss::SquaredError {
                        index: t.action,
                        target: *y,
                        weight: w * inv,
                    };
                    loss += 2.0 * q.accumulate(&x, &l, &mut grads)?;
                }
                if loss.is_finite() {
                    opt.step(q, &grads, "agent update")?;
                }
                loss
            }
        };
        if !loss.is_finite() {
            return Err(Error::numerical(
                "agent update",
                format!(
                    "TD loss {loss}; reward min/max {:?}; weight min/max {:?}",
                    min_max(&rewards),
                    min_max(&weights)
                ),
            ));
        }
        self.updates += 1;
        if self.updates % self.config.target_sync == 0 {
            self.sync_target();
        }
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        match &mut self.repr {
            Repr::Tabular { q, target } => target.clone_from(q),
            Repr::Neural { q, target, .. } => target.clone_from(q),
        }
    }

    /// Mean ± standard error of undiscounted episodic returns.
    pub fn evaluate<R: Rng + ?Sized>(
        &self,
        env: &mut Environment,
        episodes: usize,
        mode: ActMode,
        rng: &mut R,
    ) -> Result<Evaluation> {
        if episodes == 0 {
            return Err(Error::Config("evaluation needs at least one episode".into()));
        }
        let mut returns = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let mut s = env.reset(rng);
            let mut total = 0.0;
            loop {
                let a = self.act(&s, mode, rng);
                let step = env.step(&s, a, rng);
                total += step.reward;
                s = step.next_state;
                if step.done {
                    break;
                }
            }
            returns.push(total);
        }
        Ok(Evaluation::from_returns(returns))
    }

    /// Exact expected return of the agent's policy on a tabular environment.
    pub fn expected_return(&self, env: &Environment, mode: ActMode) -> Result<f64> {
        let table = self
            .policy_table(mode)
            .ok_or_else(|| Error::Unsupported("exact evaluation needs a tabular agent".into()))?;
        Ok(env.tabular_mdp()?.policy_return(&table))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("agent serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let agent: Agent = serde_json::from_str(text).map_err(|e| Error::Config(format!("bad agent checkpoint: {e}")))?;
        agent.config.validate()?;
        Ok(agent)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Format {
            path: path.into(),
            detail: e.to_string(),
        })
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}
