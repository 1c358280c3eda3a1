//! Imitation from observation across a dynamics shift.
//!
//! A discriminator `D(s, s')` separates expert state pairs (the `1 - D`
//! side) from the learner's source-domain pairs (the `D` side, each weighted
//! by its clipped importance weight `ρ`). The learner is rewarded with the
//! reward-augmented estimator `R_AE = -log D + ρ (r + log D)`, or with
//! `-ρ log D` in the DAIL reduction.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::agent::{clipped_weight, AgentConfig};
use crate::env::{EnvPair, Features};
use crate::harness::{EvalConfig, RunMetrics};
use crate::nn::{Activation, Adam, Gradients, Head, Loss, Mlp};
use crate::ratio::{ClipBounds, DomainClassifier, RatioConfig};
use crate::replay::{state_pairs, Sampled, StatePair, TrajectorySet};
use crate::train::{self, Objective, TrainSpec};
use crate::{Error, Result};

/// `-log D + ρ (r + log D)` for a given discriminator output.
pub fn reward_augmented_value(rho: f64, r_src: f64, d: f64) -> f64 {
    let log_d = d.ln();
    -log_d + rho * (r_src + log_d)
}

/// `-ρ log D` for a given discriminator output.
pub fn dail_reward_value(rho: f64, d: f64) -> f64 {
    -rho * d.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub lr: f64,
    pub noise_std: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            hidden: vec![32],
            activation: Activation::Relu,
            lr: 1e-3,
            noise_std: 0.1,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) || !(self.lr > 0.0) || !(self.noise_std >= 0.0) {
            return Err(Error::Config(
                "discriminator needs positive widths and lr and non-negative noise".into(),
            ));
        }
        Ok(())
    }
}

/// Algorithm loop cadences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Source environment steps in the run.
    pub total_steps: usize,
    /// Source steps per target step (`r`).
    pub target_rollout_period: usize,
    /// Generator steps per discriminator update (`k`).
    pub discriminator_period: usize,
    /// Number of expert trajectories (`m`).
    pub expert_trajectories: usize,
    pub generator_batch: usize,
    pub discriminator_batch: usize,
    pub source_capacity: usize,
    pub target_capacity: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            total_steps: 20_000,
            target_rollout_period: 100,
            discriminator_period: 10,
            expert_trajectories: 20,
            generator_batch: 32,
            discriminator_batch: 64,
            source_capacity: 100_000,
            target_capacity: 10_000,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("total_steps", self.total_steps),
            ("target_rollout_period", self.target_rollout_period),
            ("discriminator_period", self.discriminator_period),
            ("expert_trajectories", self.expert_trajectories),
            ("generator_batch", self.generator_batch),
            ("discriminator_batch", self.discriminator_batch),
            ("source_capacity", self.source_capacity),
            ("target_capacity", self.target_capacity),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("schedule.{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// GAIfO-style discriminator over `(s, s')`.
#[derive(Debug, Clone)]
pub struct Discriminator {
    features: Features,
    net: Mlp,
    opt: Adam,
    noise_std: f64,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(features: Features, config: &DiscriminatorConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut widths = vec![features.ss_dim()];
        widths.extend(&config.hidden);
        widths.push(1);
        let net = Mlp::with_zero_head(&widths, config.activation, Head::Sigmoid, rng)?;
        Ok(Discriminator {
            features,
            opt: Adam::for_net(config.lr, &net),
            net,
            noise_std: config.noise_std,
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    /// `D(s, s')`, clamped away from 0 and 1.
    pub fn prob(&self, s: &[f64], next: &[f64]) -> f64 {
        self.net.forward(&self.features.ss(s, next)).expect("discriminator input width")[0]
    }

    pub fn reward_augmented(&self, rho: f64, r_src: f64, s: &[f64], next: &[f64]) -> f64 {
        reward_augmented_value(rho, r_src, self.prob(s, next))
    }

    pub fn dail_reward(&self, rho: f64, s: &[f64], next: &[f64]) -> f64 {
        dail_reward_value(rho, self.prob(s, next))
    }

    /// One Adam step on `-[mean_expert log(1 - D) + mean_policy ρ log D]`;
    /// returns the pre-update loss.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        expert: &[&StatePair],
        policy: &[(&StatePair, f64)],
        rng: &mut R,
    ) -> Result<f64> {
        if expert.is_empty() {
            return Err(Error::Config("discriminator update needs expert pairs".into()));
        }
        if policy.is_empty() {
            return Err(Error::Config("discriminator update needs policy pairs".into()));
        }
        let noise = Normal::new(0.0, self.noise_std.max(f64::MIN_POSITIVE)).expect("valid normal");
        let mut grads = Gradients::zeros_like(&self.net);
        let mut loss = 0.0;
        let we = 1.0 / expert.len() as f64;
        let wp = 1.0 / policy.len() as f64;
        let items = expert
            .iter()
            .map(|p| (*p, 0.0, we))
            .chain(policy.iter().map(|(p, rho)| (*p, 1.0, rho * wp)));
        for ((s, next), label, weight) in items {
            let mut x = self.features.ss(s, next);
            if self.noise_std > 0.0 {
                x.iter_mut().for_each(|v| *v += noise.sample(rng));
            }
            loss += self
                .net
                .accumulate(&x, &Loss::BinaryCrossEntropy { label, weight }, &mut grads)?;
        }
        if !loss.is_finite() {
            let rhos: Vec<f64> = policy.iter().map(|p| p.1).collect();
            return Err(Error::numerical(
                "discriminator update",
                format!("loss {loss}; rho values {rhos:?}"),
            ));
        }
        self.opt.step(&mut self.net, &grads, "discriminator update")?;
        Ok(loss)
    }
}

/// Sample an expert batch and weight the learner's batch by clipped `ρ`,
/// then take one discriminator step.
#[allow(clippy::too_many_arguments)]
pub fn train_discriminator<R: Rng + ?Sized>(
    disc: &mut Discriminator,
    expert_pairs: &[StatePair],
    policy_batch: &[Sampled<'_>],
    ratio: Option<&dyn DomainClassifier>,
    clip: ClipBounds,
    expert_batch: usize,
    rng: &mut R,
) -> Result<f64> {
    if expert_pairs.is_empty() {
        return Err(Error::Config("expert demonstration set is empty".into()));
    }
    let expert: Vec<&StatePair> = (0..expert_batch.max(1))
        .map(|_| &expert_pairs[rng.random_range(0..expert_pairs.len())])
        .collect();
    let pairs: Vec<StatePair> = state_pairs(policy_batch.iter().map(|p| p.transition));
    let policy: Vec<(&StatePair, f64)> = pairs
        .iter()
        .zip(policy_batch)
        .map(|(pair, item)| (pair, clipped_weight(ratio, item.transition, &item.history, clip)))
        .collect();
    disc.train_step(&expert, &policy, rng)
}

/// Run the reward-augmented imitation loop and return the learner with its
/// metrics. `dail` switches the learner reward to `-ρ log D`.
#[allow(clippy::too_many_arguments)]
pub fn darail_run(
    pair: &EnvPair,
    expert: &TrajectorySet,
    schedule: &ScheduleConfig,
    agent: &AgentConfig,
    ratio: &RatioConfig,
    disc: &DiscriminatorConfig,
    eval: &EvalConfig,
    n_step: usize,
    dail: bool,
    seed: u64,
) -> Result<(crate::agent::Agent, RunMetrics)> {
    if expert.is_empty() || expert.n_transitions() == 0 {
        return Err(Error::Config("DARAIL needs a non-empty expert trajectory set".into()));
    }
    let spec = TrainSpec {
        pair: pair.clone(),
        objective: if dail { Objective::Dail } else { Objective::Darail },
        agent: agent.clone(),
        ratio: ratio.clone(),
        disc: disc.clone(),
        schedule: schedule.clone(),
        eval: eval.clone(),
        n_step,
        expert: Some(expert.clone()),
        seed,
    };
    let out = train::train(&spec)?;
    Ok((out.agent, out.metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvSpec, GridSpec};
    use crate::seed;

    #[test]
    fn reward_augmented_examples() {
        assert!((reward_augmented_value(1.0, 2.0, 0.3) - 2.0).abs() < 1e-15);
        assert!((reward_augmented_value(0.0, 5.0, 0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        let expect = std::f64::consts::LN_2 + 2.0 * (1.0 - std::f64::consts::LN_2);
        assert!((reward_augmented_value(2.0, 1.0, 0.5) - expect).abs() < 1e-12);
    }

    #[test]
    fn dail_examples() {
        assert!((dail_reward_value(1.0, 0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(dail_reward_value(0.0, 0.5), 0.0);
        assert!(dail_reward_value(1.0, 1.0 - 1e-6) < 1.1e-6);
    }

    #[test]
    fn first_loss_at_half() {
        let f = EnvSpec::WindyGrid(GridSpec::default()).features();
        let cfg = DiscriminatorConfig {
            noise_std: 0.0,
            ..DiscriminatorConfig::default()
        };
        let mut d = Discriminator::new(f, &cfg, &mut seed::rng(0)).unwrap();
        let e: StatePair = (vec![0.0, 0.0], vec![1.0, 0.0]);
        let p: StatePair = (vec![1.0, 1.0], vec![2.0, 1.0]);
        let rhos = [0.5, 2.0, 3.0];
        let policy: Vec<(&StatePair, f64)> = rhos.iter().map(|r| (&p, *r)).collect();
        let loss = d.train_step(&[&e, &e], &policy, &mut seed::rng(1)).unwrap();
        let mean_rho = rhos.iter().sum::<f64>() / 3.0;
        let ln2 = std::f64::consts::LN_2;
        assert!((loss - (ln2 + mean_rho * ln2)).abs() < 1e-12);
    }

    #[test]
    fn empty_expert_rejected() {
        let f = EnvSpec::WindyGrid(GridSpec::default()).features();
        let mut d = Discriminator::new(f, &DiscriminatorConfig::default(), &mut seed::rng(0)).unwrap();
        let r = train_discriminator(&mut d, &[], &[], None, ClipBounds::DEFAULT, 4, &mut seed::rng(0));
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
