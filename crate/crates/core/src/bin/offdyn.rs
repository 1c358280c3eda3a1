use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use offdyn::agent::{ActMode, Agent};
use offdyn::env::Domain;
use offdyn::harness::{
    aggregate_dir, run_methods, run_sweep, write_results, ExperimentConfig, ExpertSource, Method, MethodResult, Sweep,
};
use offdyn::seed::{self, Stream};
use offdyn::{Error, Result};

#[derive(Parser)]
#[command(name = "offdyn", version, about = "Off-dynamics RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. `--set agent.alpha=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train DARC and roll out expert demonstrations.
    TrainDarc(Common),
    /// Train DARAIL from a DARC output directory or inline.
    TrainDarail {
        #[command(flatten)]
        common: Common,
        /// `inline` or a DARC output directory.
        #[arg(long, default_value = "inline")]
        expert: String,
    },
    /// Train a baseline method.
    TrainBaseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: BaselineArg,
        /// Expert source for dail: `inline` or a DARC output directory.
        #[arg(long, default_value = "inline")]
        expert: String,
    },
    /// Run an ablation sweep.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        sweep: SweepArg,
        /// Comma-separated methods (defaults depend on the sweep).
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
    },
    /// Evaluate a saved agent.
    Evaluate {
        /// Agent checkpoint (`agent.json`).
        #[arg(long)]
        agent: PathBuf,
        /// Environment config; defaults to `config.toml` next to the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        domain: DomainArg,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, value_enum, default_value = "greedy")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Rebuild the aggregate JSON of a method directory from its seed CSVs.
    Export {
        /// Method directory containing `seed_*/metrics.csv`.
        #[arg(long)]
        run: PathBuf,
        /// Output file (defaults to `<run>/aggregate.json`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        final_window: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    IsR,
    IsAcl,
    Dail,
    SourceOnly,
    TargetOracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Clip,
    Pf,
    Eta,
    K,
    N,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Src,
    Trg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Greedy,
    Sample,
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&common.config, &common.overrides)?;
    if let Some(s) = common.seed {
        config.seeds = vec![s];
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn root_of(config: &ExperimentConfig) -> PathBuf {
    config.out_dir.join(&config.name)
}

fn report(results: &[MethodResult], root: &Path) {
    for r in results {
        let a = &r.aggregate;
        println!(
            "{:<14} source {:>9.3} ± {:<7.3} target {:>9.3} ± {:<7.3} ({} seeds)",
            a.method,
            a.source_train_mean,
            a.source_train_stderr,
            a.target_eval_mean,
            a.target_eval_stderr,
            a.per_seed.len()
        );
    }
    println!("results written to {}", root.display());
}

fn train(config: ExperimentConfig, methods: &[Method]) -> Result<()> {
    let results = run_methods(&config, methods)?;
    let root = root_of(&config);
    write_results(&root, &config, &results)?;
    report(&results, &root);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainDarc(common) => train(load(&common)?, &[Method::Darc]),
        Command::TrainDarail { common, expert } => {
            let mut config = load(&common)?;
            config.expert = ExpertSource::parse(&expert);
            train(config, &[Method::Darail])
        }
        Command::TrainBaseline { common, method, expert } => {
            let mut config = load(&common)?;
            config.expert = ExpertSource::parse(&expert);
            let m = match method {
                BaselineArg::IsR => Method::IsR,
                BaselineArg::IsAcl => Method::IsAcl,
                BaselineArg::Dail => Method::Dail,
                BaselineArg::SourceOnly => Method::SourceOnly,
                BaselineArg::TargetOracle => Method::TargetOracle,
            };
            train(config, &[m])
        }
        Command::Ablate { common, sweep, methods } => {
            let config = load(&common)?;
            let sweep = match sweep {
                SweepArg::Clip => Sweep::Clip,
                SweepArg::Pf => Sweep::Pf,
                SweepArg::Eta => Sweep::Eta,
                SweepArg::K => Sweep::K,
                SweepArg::N => Sweep::N,
            };
            let methods = if methods.is_empty() {
                sweep.default_methods()
            } else {
                methods.iter().map(|m| Method::parse(m)).collect::<Result<_>>()?
            };
            let root = root_of(&config).join(format!("ablate-{}", sweep.name()));
            for point in run_sweep(&config, sweep, &methods, Some(&root))? {
                println!("[{}]", point.label);
                report(&point.results, &root.join(&point.label));
            }
            Ok(())
        }
        Command::Evaluate {
            agent,
            config,
            domain,
            episodes,
            mode,
            seed,
        } => {
            let cfg_path = config.unwrap_or_else(|| agent.with_file_name("config.toml"));
            let config = ExperimentConfig::load(&cfg_path, &[])?;
            let a = Agent::load(&agent)?;
            let pair = config.pair()?;
            if a.features() != &pair.spec().features() {
                return Err(Error::Config("checkpoint does not match the environment in the config".into()));
            }
            let d = match domain {
                DomainArg::Src => Domain::Src,
                DomainArg::Trg => Domain::Trg,
            };
            let mode = match mode {
                ModeArg::Greedy => ActMode::Greedy,
                ModeArg::Sample => ActMode::Sample,
            };
            let mut env = pair.get(d).clone();
            let ev = a.evaluate(&mut env, episodes, mode, &mut seed::stream(seed, Stream::Evaluation))?;
            println!(
                "{}",
                serde_json::json!({ "domain": d, "episodes": episodes, "mean": ev.mean, "stderr": ev.stderr })
            );
            Ok(())
        }
        Command::Export { run, out, final_window } => {
            let agg = aggregate_dir(&run, final_window)?;
            let path = out.unwrap_or_else(|| run.join("aggregate.json"));
            agg.write_json(&path)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
