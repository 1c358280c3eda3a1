//! The shared off-dynamics training loop.
//!
//! Every method follows the same skeleton: each step the learner acts once
//! in its training domain; every `target_rollout_period` steps it also acts
//! once in the target domain (reward hidden); the ratio classifiers, the
//! discriminator and the agent are then updated at their own cadences, and
//! the policy is evaluated periodically in both domains.

use crate::agent::{ActMode, Agent, AgentConfig, RewardProvider, Weighting};
use crate::env::{firewall, Domain, EnvPair, Environment, State, Transition};
use crate::harness::{EvalConfig, EvalPoint, RunMetrics};
use crate::imitation::{train_discriminator, Discriminator, DiscriminatorConfig, ScheduleConfig};
use crate::ratio::{importance_weight, DensityRatioModel, DomainClassifier, RatioConfig};
use crate::replay::{sample_balanced, state_pairs, ReplayBuffer, StatePair, TrajectorySet};
use crate::seed::{self, Stream};
use crate::{Error, Result};

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Objective {
    /// Source training on `r + η Δr`.
    Darc { eta: f64 },
    /// Imitation with the reward-augmented estimator.
    Darail,
    /// Imitation with `-ρ log D` only.
    Dail,
    /// Source training on `ρ r`.
    IsR,
    /// Source training with `ρ`-weighted TD errors.
    IsAcl,
    /// Plain source training.
    SourceOnly,
    /// Training directly on the target, target rewards included.
    TargetOracle,
}

impl Objective {
    pub fn uses_ratio(&self) -> bool {
        !matches!(self, Objective::SourceOnly | Objective::TargetOracle)
    }

    pub fn uses_discriminator(&self) -> bool {
        matches!(self, Objective::Darail | Objective::Dail)
    }

    pub fn training_domain(&self) -> Domain {
        match self {
            Objective::TargetOracle => Domain::Trg,
            _ => Domain::Src,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Objective::Darc { .. } => "darc",
            Objective::Darail => "darail",
            Objective::Dail => "dail",
            Objective::IsR => "is-r",
            Objective::IsAcl => "is-acl",
            Objective::SourceOnly => "source-only",
            Objective::TargetOracle => "target-oracle",
        }
    }
}

/// Everything one training run needs.
#[derive(Debug, Clone)]
pub struct TrainSpec {
    pub pair: EnvPair,
    pub objective: Objective,
    pub agent: AgentConfig,
    pub ratio: RatioConfig,
    pub disc: DiscriminatorConfig,
    pub schedule: ScheduleConfig,
    pub eval: EvalConfig,
    /// Cumulative importance-weight window; 0 is the per-step weight.
    pub n_step: usize,
    pub expert: Option<TrajectorySet>,
    pub seed: u64,
}

pub struct TrainOutcome {
    pub agent: Agent,
    pub metrics: RunMetrics,
    pub ratio_model: Option<DensityRatioModel>,
    pub discriminator: Option<Discriminator>,
    /// Hidden target rewards read during the run (must be 0).
    pub target_reward_reads: u64,
}

/// A persistent episode in one environment.
struct Roller {
    env: Environment,
    state: State,
    t: usize,
    episodes: usize,
}

impl Roller {
    fn new<R: Rng + ?Sized>(mut env: Environment, rng: &mut R) -> Self {
        let state = env.reset(rng);
        Roller {
            env,
            state,
            t: 0,
            episodes: 0,
        }
    }

    fn step<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        agent: &Agent,
        explore: usize,
        env_rng: &mut R1,
        act_rng: &mut R2,
    ) -> Transition {
        let a = if self.episodes < explore {
            agent.act_uniform(act_rng)
        } else {
            agent.act(&self.state, ActMode::Sample, act_rng)
        };
        let step = self.env.step(&self.state, a, env_rng);
        let t = Transition::new(
            self.state.clone(),
            a,
            step.next_state.clone(),
            step.reward,
            step.terminal,
            step.done,
            self.env.domain(),
        )
        .at_step(self.t);
        if step.done {
            self.episodes += 1;
            self.t = 0;
            self.state = self.env.reset(env_rng);
        } else {
            self.t += 1;
            self.state = step.next_state;
        }
        t
    }
}

/// Roll out whole episodes of `agent` in `env` with rewards visible.
pub fn rollout_episodes<R: Rng + ?Sized>(
    agent: &Agent,
    env: &mut Environment,
    episodes: usize,
    mode: ActMode,
    rng: &mut R,
) -> Result<TrajectorySet> {
    let mut set = TrajectorySet::new();
    for _ in 0..episodes {
        let mut s = env.reset(rng);
        let mut traj = Vec::new();
        loop {
            let a = agent.act(&s, mode, rng);
            let step = env.step(&s, a, rng);
            traj.push(
                Transition::new(
                    s.clone(),
                    a,
                    step.next_state.clone(),
                    step.reward,
                    step.terminal,
                    step.done,
                    env.domain(),
                )
                .at_step(traj.len()),
            );
            s = step.next_state;
            if step.done {
                break;
            }
        }
        set.push(traj)?;
    }
    Ok(set)
}

/// Mean return (and its standard error) of `agent` on `env`.
pub fn evaluate_on<R: Rng + ?Sized>(agent: &Agent, env: &Environment, eval: &EvalConfig, rng: &mut R) -> Result<(f64, f64)> {
    if eval.exact && agent.q_table().is_some() && env.spec().n_states().is_some() {
        return Ok((agent.expected_return(env, eval.mode)?, 0.0));
    }
    let mut env = env.clone();
    let ev = agent.evaluate(&mut env, eval.episodes, eval.mode, rng)?;
    Ok((ev.mean, ev.stderr))
}

const PROBE: usize = 256;

/// Statistics of clipped `ρ` over the most recent source transitions.
fn rho_diagnostics(model: &DensityRatioModel, buf: &ReplayBuffer, ratio: &RatioConfig) -> (f64, f64, f64, f64) {
    let skip = buf.len().saturating_sub(PROBE);
    let mut rhos = Vec::with_capacity(PROBE);
    let mut clipped = 0usize;
    for t in buf.iter_ordered().skip(skip) {
        let raw = importance_weight(model, &t.state, t.action, &t.next_state, None);
        if ratio.clip.clips(raw) {
            clipped += 1;
        }
        rhos.push(ratio.clip.apply(raw));
    }
    if rhos.is_empty() {
        return (1.0, 1.0, 1.0, 0.0);
    }
    let n = rhos.len() as f64;
    let mean = rhos.iter().sum::<f64>() / n;
    let max = rhos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    rhos.sort_by(f64::total_cmp);
    let mid = rhos.len() / 2;
    let median = if rhos.len() % 2 == 0 {
        0.5 * (rhos[mid - 1] + rhos[mid])
    } else {
        rhos[mid]
    };
    (mean, median, max, clipped as f64 / n)
}

pub fn validate(spec: &TrainSpec) -> Result<()> {
    spec.agent.validate()?;
    spec.ratio.validate()?;
    spec.disc.validate()?;
    spec.schedule.validate()?;
    spec.eval.validate()?;
    if let Objective::Darc { eta } = spec.objective {
        if !(eta >= 1.0 && eta.is_finite()) {
            return Err(Error::Config(format!("eta must be at least 1, got {eta}")));
        }
    }
    if spec.objective.uses_discriminator() {
        match &spec.expert {
            Some(e) if e.n_transitions() > 0 => {}
            _ => return Err(Error::Config("imitation methods need a non-empty expert set".into())),
        }
    }
    Ok(())
}

pub fn train(spec: &TrainSpec) -> Result<TrainOutcome> {
    validate(spec)?;
    let reads_before = firewall::target_reward_reads();
    let objective = spec.objective;
    let sched = &spec.schedule;
    let features = spec.pair.spec().features();

    let mut rng_src = seed::stream(spec.seed, Stream::SourceEnv);
    let mut rng_trg = seed::stream(spec.seed, Stream::TargetEnv);
    let mut rng_act = seed::stream(spec.seed, Stream::Agent);
    let mut rng_cls = seed::stream(spec.seed, Stream::Classifier);
    let mut rng_disc = seed::stream(spec.seed, Stream::Discriminator);
    let mut rng_eval = seed::stream(spec.seed, Stream::Evaluation);
    let mut rng_replay = seed::stream(spec.seed, Stream::Replay);
    let mut rng_init = seed::stream(spec.seed, Stream::AgentInit);

    let mut agent = Agent::new(features, spec.agent.clone(), &mut rng_init)?;
    let mut ratio_model = if objective.uses_ratio() {
        Some(DensityRatioModel::new(features, &spec.ratio, &mut rng_init)?)
    } else {
        None
    };
    let mut disc = if objective.uses_discriminator() {
        Some(Discriminator::new(features, &spec.disc, &mut rng_init)?)
    } else {
        None
    };
    let expert_pairs: Vec<StatePair> = spec.expert.as_ref().map(|e| state_pairs(e.iter())).unwrap_or_default();

    let train_domain = objective.training_domain();
    let (train_env, other_env) = match train_domain {
        Domain::Src => (spec.pair.source.clone(), spec.pair.target.clone()),
        Domain::Trg => (spec.pair.target.clone(), spec.pair.source.clone()),
    };
    let mut learner = match train_domain {
        Domain::Src => Roller::new(train_env, &mut rng_src),
        Domain::Trg => Roller::new(train_env, &mut rng_trg),
    };
    let mut probe = if objective.uses_ratio() {
        Some(Roller::new(other_env, &mut rng_trg))
    } else {
        None
    };
    let mut learn_buf = ReplayBuffer::new(sched.source_capacity, train_domain)?;
    let mut trg_buf = ReplayBuffer::new(sched.target_capacity, Domain::Trg)?;

    let explore = spec.agent.exploration_episodes;
    let mut metrics = RunMetrics::default();
    let mut last_cls: Option<(f64, f64)> = None;
    let mut last_disc: Option<f64> = None;

    for step in 0..sched.total_steps {
        let t = match train_domain {
            Domain::Src => learner.step(&agent, explore, &mut rng_src, &mut rng_act),
            Domain::Trg => learner.step(&agent, explore, &mut rng_trg, &mut rng_act),
        };
        learn_buf.push(t);

        if let (Some(roller), true) = (probe.as_mut(), step % sched.target_rollout_period == 0) {
            let t = roller.step(&agent, explore, &mut rng_trg, &mut rng_act);
            trg_buf.push(t.hide_reward());
        }

        if let Some(model) = ratio_model.as_mut() {
            if step % spec.ratio.update_period == 0 {
                let batch = sample_balanced(&learn_buf, &trg_buf, spec.ratio.batch_size, &mut rng_cls)?;
                last_cls = Some(model.train_step(&batch, &mut rng_cls)?);
            }
        }
        let ratio_ref: Option<&dyn DomainClassifier> = match &ratio_model {
            Some(m) if step >= spec.ratio.warmup_steps => Some(m),
            _ => None,
        };

        if let Some(d) = disc.as_mut() {
            if step % sched.discriminator_period == 0 {
                let batch = learn_buf.sample_with_history(sched.discriminator_batch, spec.n_step, &mut rng_disc)?;
                last_disc = Some(train_discriminator(
                    d,
                    &expert_pairs,
                    &batch,
                    ratio_ref,
                    spec.ratio.clip,
                    sched.discriminator_batch,
                    &mut rng_disc,
                )?);
            }
        }

        let clip = spec.ratio.clip;
        let provider = match objective {
            Objective::Darc { eta } => RewardProvider::DarcModified {
                ratio: ratio_ref,
                eta,
                clip: Some(clip),
            },
            Objective::Darail => RewardProvider::RewardAugmented {
                ratio: ratio_ref,
                disc: disc.as_ref().expect("discriminator"),
                clip,
            },
            Objective::Dail => RewardProvider::DiscriminatorOnly {
                ratio: ratio_ref,
                disc: disc.as_ref().expect("discriminator"),
                clip,
            },
            Objective::IsR => RewardProvider::IsWeighted { ratio: ratio_ref, clip },
            Objective::IsAcl | Objective::SourceOnly | Objective::TargetOracle => RewardProvider::GroundTruth,
        };
        let weighting = match objective {
            Objective::IsAcl => Weighting::IsAcl { ratio: ratio_ref, clip },
            _ => Weighting::None,
        };
        for _ in 0..spec.agent.updates_per_step {
            let batch = learn_buf.sample_with_history(sched.generator_batch, spec.n_step, &mut rng_replay)?;
            agent.update(&batch, &provider, weighting)?;
        }

        if (step + 1) % spec.eval.period == 0 || step + 1 == sched.total_steps {
            let (src_ret, _) = evaluate_on(&agent, &spec.pair.source, &spec.eval, &mut rng_eval)?;
            let (trg_ret, trg_se) = evaluate_on(&agent, &spec.pair.target, &spec.eval, &mut rng_eval)?;
            let (rho_mean, rho_median, rho_max, clip_frac) = match &ratio_model {
                Some(m) => {
                    let d = rho_diagnostics(m, &learn_buf, &spec.ratio);
                    (Some(d.0), Some(d.1), Some(d.2), Some(d.3))
                }
                None => (None, None, None, None),
            };
            let point = EvalPoint {
                step: step + 1,
                source_train_return: src_ret,
                target_eval_return: trg_ret,
                stderr: trg_se,
                rho_mean,
                rho_median,
                rho_max,
                clip_frac,
                disc_loss: last_disc,
                cls_loss_sa: last_cls.map(|c| c.0),
                cls_loss_sas: last_cls.map(|c| c.1),
            };
            point.check_finite()?;
            metrics.points.push(point);
        }
    }

    Ok(TrainOutcome {
        agent,
        metrics,
        ratio_model,
        discriminator: disc,
        target_reward_reads: firewall::target_reward_reads() - reads_before,
    })
}
