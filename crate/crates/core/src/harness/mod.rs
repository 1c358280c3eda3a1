//! Experiment orchestration: configuration, per-method runs, seeds,
//! ablation sweeps and metrics export.
//!
//! Run directories are laid out as `<out_dir>/<name>/<method>/seed_<n>/`
//! holding `metrics.csv`, `summary.json`, `config.toml`, `agent.json` and,
//! for DARC, `expert.json`; each method directory also gets an
//! `aggregate.json` over its seeds.

mod ablate;
mod config;
mod metrics;

pub use ablate::{run_sweep, sweep_points, Sweep, SweepPoint, SweepResult};
pub use config::{apply_override, EvalConfig, ExperimentConfig, ExpertSource, Method};
pub use metrics::{Aggregate, EvalPoint, RunMetrics, RunSummary, SeedFinal, CSV_HEADER};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::agent::Agent;
use crate::replay::TrajectorySet;
use crate::seed::{self, Stream};
use crate::train::{self, rollout_episodes, TrainSpec};
use crate::{Error, Result};

/// One finished (method, seed) run.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub method: Method,
    pub seed: u64,
    pub agent: Agent,
    pub metrics: RunMetrics,
    /// Demonstrations rolled out by a DARC agent.
    pub expert: Option<TrajectorySet>,
    pub summary: RunSummary,
}

/// All seeds of one method.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    pub runs: Vec<SeedRun>,
    pub aggregate: Aggregate,
}

impl MethodResult {
    fn new(method: Method, runs: Vec<SeedRun>) -> Self {
        let finals = runs
            .iter()
            .map(|r| SeedFinal {
                seed: r.seed,
                source_train_return: r.summary.final_source_train_return,
                target_eval_return: r.summary.final_target_eval_return,
            })
            .collect();
        MethodResult {
            method,
            aggregate: Aggregate::from_finals(method.name(), finals),
            runs,
        }
    }
}

fn spec_for(config: &ExperimentConfig, method: Method, seed: u64, expert: Option<&TrajectorySet>) -> Result<TrainSpec> {
    Ok(TrainSpec {
        pair: config.pair()?,
        objective: method.objective(config.eta),
        agent: config.agent.clone(),
        ratio: config.ratio.clone(),
        disc: config.discriminator.clone(),
        schedule: config.schedule.clone(),
        eval: config.eval.clone(),
        n_step: config.n_step,
        expert: expert.cloned(),
        seed,
    })
}

fn finish(
    config: &ExperimentConfig,
    method: Method,
    seed: u64,
    out: train::TrainOutcome,
    expert: Option<TrajectorySet>,
    started: Instant,
) -> SeedRun {
    let w = config.eval.final_window;
    let last_se = out.metrics.points.last().map(|p| p.stderr).unwrap_or(f64::NAN);
    let mut echo = config.clone();
    echo.method = method;
    echo.seeds = vec![seed];
    let summary = RunSummary {
        method: method.name().to_string(),
        seed,
        config: echo.to_json_value(),
        final_source_train_return: out.metrics.final_source(w),
        final_target_eval_return: out.metrics.final_target(w),
        final_stderr: last_se,
        wall_time_secs: started.elapsed().as_secs_f64(),
        target_reward_reads: out.target_reward_reads,
    };
    SeedRun {
        method,
        seed,
        agent: out.agent,
        metrics: out.metrics,
        expert,
        summary,
    }
}

/// Train DARC on the source and roll out `m` expert trajectories with it.
pub fn run_darc(config: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let started = Instant::now();
    let out = train::train(&spec_for(config, Method::Darc, seed, None)?)?;
    let mut env = config.pair()?.source;
    let mut rng = seed::stream(seed, Stream::Expert);
    let expert = rollout_episodes(
        &out.agent,
        &mut env,
        config.schedule.expert_trajectories,
        config.eval.mode,
        &mut rng,
    )?;
    Ok(finish(config, Method::Darc, seed, out, Some(expert), started))
}

/// Reward-augmented imitation from the given expert set.
pub fn run_darail(config: &ExperimentConfig, seed: u64, expert: &TrajectorySet) -> Result<SeedRun> {
    run_baseline(config, Method::Darail, seed, Some(expert))
}

/// Any non-DARC method; imitation methods need `expert`.
pub fn run_baseline(config: &ExperimentConfig, method: Method, seed: u64, expert: Option<&TrajectorySet>) -> Result<SeedRun> {
    if method == Method::Darc {
        return run_darc(config, seed);
    }
    if method.needs_expert() && expert.is_none() {
        return Err(Error::Config(format!("{} needs expert demonstrations", method.name())));
    }
    let started = Instant::now();
    let out = train::train(&spec_for(config, method, seed, expert)?)?;
    Ok(finish(config, method, seed, out, None, started))
}

/// Load `expert.json` for `seed` from a previous DARC output directory.
pub fn load_expert(dir: &Path, seed: u64) -> Result<TrajectorySet> {
    let candidates = [
        dir.join(format!("seed_{seed}")).join("expert.json"),
        dir.join("darc").join(format!("seed_{seed}")).join("expert.json"),
        dir.join("expert.json"),
    ];
    let path = candidates
        .iter()
        .find(|p| p.exists())
        .ok_or_else(|| Error::Config(format!("no expert.json for seed {seed} under {}", dir.display())))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.clone(),
        detail: e.to_string(),
    })
}

/// Run every method in `methods` over the configured seeds, in parallel.
/// DARC runs first when a listed method needs inline demonstrations; its
/// expert sets are shared with the imitation methods of the same seed.
pub fn run_methods(config: &ExperimentConfig, methods: &[Method]) -> Result<Vec<MethodResult>> {
    config.validate()?;
    let need_inline = methods.iter().any(|m| m.needs_expert()) && config.expert == ExpertSource::Inline;
    let want_darc = methods.contains(&Method::Darc);
    let darc_runs: Vec<SeedRun> = if need_inline || want_darc {
        config
            .seeds
            .par_iter()
            .map(|&s| run_darc(config, s))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let experts: Vec<Option<TrajectorySet>> = config
        .seeds
        .iter()
        .enumerate()
        .map(|(i, &s)| match &config.expert {
            _ if !methods.iter().any(|m| m.needs_expert()) => Ok(None),
            ExpertSource::Inline => Ok(darc_runs[i].expert.clone()),
            ExpertSource::Dir(d) => load_expert(d, s).map(Some),
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(Method, usize)> = methods
        .iter()
        .filter(|m| **m != Method::Darc)
        .flat_map(|m| (0..config.seeds.len()).map(move |i| (*m, i)))
        .collect();
    let others: Vec<SeedRun> = jobs
        .par_iter()
        .map(|&(m, i)| run_baseline(config, m, config.seeds[i], experts[i].as_ref()))
        .collect::<Result<_>>()?;
    let mut results = Vec::new();
    for &m in methods {
        let runs: Vec<SeedRun> = if m == Method::Darc {
            darc_runs.clone()
        } else {
            others.iter().filter(|r| r.method == m).cloned().collect()
        };
        results.push(MethodResult::new(m, runs));
    }
    Ok(results)
}

pub fn method_dir(root: &Path, method: Method) -> PathBuf {
    root.join(method.name())
}

/// Write one run's artifacts into `dir`.
pub fn write_run(dir: &Path, config: &ExperimentConfig, run: &SeedRun) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    run.metrics.write_csv(&dir.join("metrics.csv"))?;
    let summary = dir.join("summary.json");
    std::fs::write(&summary, serde_json::to_string_pretty(&run.summary).expect("summary serializes"))
        .map_err(|e| Error::io(&summary, e))?;
    let mut echo = config.clone();
    echo.method = run.method;
    echo.seeds = vec![run.seed];
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, echo.to_toml_string()).map_err(|e| Error::io(&cfg, e))?;
    run.agent.save(&dir.join("agent.json"))?;
    if let Some(expert) = &run.expert {
        let path = dir.join("expert.json");
        std::fs::write(&path, serde_json::to_string(expert).expect("expert serializes"))
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Write all runs plus per-method aggregates under `root`.
pub fn write_results(root: &Path, config: &ExperimentConfig, results: &[MethodResult]) -> Result<()> {
    for r in results {
        let mdir = method_dir(root, r.method);
        for run in &r.runs {
            write_run(&mdir.join(format!("seed_{}", run.seed)), config, run)?;
        }
        r.aggregate.write_json(&mdir.join("aggregate.json"))?;
    }
    Ok(())
}

/// Rebuild the aggregate of a method directory from its `seed_*/metrics.csv`.
pub fn aggregate_dir(dir: &Path, final_window: usize) -> Result<Aggregate> {
    let mut finals = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut seeds: Vec<(u64, PathBuf)> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().to_string();
            name.strip_prefix("seed_")
                .and_then(|s| s.parse().ok())
                .map(|s| (s, e.path()))
        })
        .collect();
    seeds.sort();
    if seeds.is_empty() {
        return Err(Error::Config(format!("no seed_* directories under {}", dir.display())));
    }
    for (seed, path) in seeds {
        let m = RunMetrics::read_csv(&path.join("metrics.csv"))?;
        finals.push(SeedFinal {
            seed,
            source_train_return: m.final_source(final_window),
            target_eval_return: m.final_target(final_window),
        });
    }
    let method = dir
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_default();
    Ok(Aggregate::from_finals(&method, finals))
}
