use std::process::Command;

use offdyn::env::ShiftConfig;
use offdyn::harness::{
    aggregate_dir, load_expert, run_baseline, run_methods, write_results, ExperimentConfig, Method, RunMetrics, CSV_HEADER,
};

const BASE: &str = include_str!("../../../configs/broken_source.toml");

fn short_config() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(
        BASE,
        &[
            "schedule.total_steps=1500".into(),
            "eval.period=500".into(),
            "seeds=[0, 1]".into(),
        ],
    )
    .unwrap()
}

#[test]
fn written_runs_read_back_identically() {
    let config = short_config();
    let results = run_methods(&config, &[Method::Darc, Method::Darail]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_results(dir.path(), &config, &results).unwrap();
    for r in &results {
        let mdir = dir.path().join(r.method.name());
        let agg = aggregate_dir(&mdir, config.eval.final_window).unwrap();
        assert_eq!(agg, r.aggregate);
        for run in &r.runs {
            let sdir = mdir.join(format!("seed_{}", run.seed));
            let text = std::fs::read_to_string(sdir.join("metrics.csv")).unwrap();
            assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
            let back = RunMetrics::from_csv_str(&text, &sdir).unwrap();
            assert_eq!(back, run.metrics);
            let echoed = ExperimentConfig::load(&sdir.join("config.toml"), &[]).unwrap();
            assert_eq!(echoed.seeds, vec![run.seed]);
            assert_eq!(echoed.method, r.method);
            assert_eq!(echoed.env, config.env);
        }
    }
    // imitation from a saved expert matches the inline run exactly
    let expert = load_expert(&dir.path().join("darc"), 1).unwrap();
    let replay = run_baseline(&config, Method::Darail, 1, Some(&expert)).unwrap();
    let inline = &results[1].runs[1];
    assert_eq!(replay.metrics.to_csv_string(), inline.metrics.to_csv_string());
}

#[test]
fn seeds_are_independent_of_scheduling() {
    let mut config = short_config();
    let both = run_methods(&config, &[Method::IsR]).unwrap();
    config.seeds = vec![1];
    let single = run_methods(&config, &[Method::IsR]).unwrap();
    assert_eq!(
        both[0].runs[1].metrics.to_csv_string(),
        single[0].runs[0].metrics.to_csv_string()
    );
    assert_ne!(
        both[0].runs[0].metrics.to_csv_string(),
        both[0].runs[1].metrics.to_csv_string()
    );
}

#[test]
fn no_method_reads_hidden_target_rewards() {
    let mut config = short_config();
    config.seeds = vec![2];
    config.source_shift = ShiftConfig::broken(0, 0.5);
    let all = [
        Method::Darc,
        Method::Darail,
        Method::Dail,
        Method::IsR,
        Method::IsAcl,
        Method::SourceOnly,
        Method::TargetOracle,
    ];
    for r in run_methods(&config, &all).unwrap() {
        for run in &r.runs {
            assert_eq!(run.summary.target_reward_reads, 0, "{}", r.method.name());
        }
    }
}

fn offdyn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_offdyn"))
}

#[test]
fn cli_trains_evaluates_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.toml");
    std::fs::write(&cfg, short_config().to_toml_string()).unwrap();
    let out = dir.path().join("runs");
    let status = offdyn()
        .args(["train-darc", "--seed", "0", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let darc = out.join("broken-source").join("darc");
    let status = offdyn()
        .args(["train-darail", "--seed", "0", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .arg("--expert")
        .arg(&darc)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let eval = offdyn()
        .arg("evaluate")
        .arg("--agent")
        .arg(darc.join("seed_0").join("agent.json"))
        .args(["--domain", "trg", "--episodes", "20"])
        .output()
        .unwrap();
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let v: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(v["episodes"], 20);
    assert!(v["mean"].as_f64().unwrap().is_finite());

    let json = dir.path().join("agg.json");
    let export = offdyn()
        .arg("export")
        .arg("--run")
        .arg(out.join("broken-source").join("darail"))
        .arg("--out")
        .arg(&json)
        .output()
        .unwrap();
    assert!(export.status.success(), "{}", String::from_utf8_lossy(&export.stderr));
    let agg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(agg["method"], "darail");
}

#[test]
fn cli_config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "eta = 0.5\n").unwrap();
    let out = offdyn().arg("train-darc").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let missing = offdyn()
        .args(["train-darc", "--config", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    let unknown = offdyn().args(["ablate", "--sweep", "gamma"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));
}
