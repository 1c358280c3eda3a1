//! Experiment configuration files.
//!
//! One TOML file per experiment. Every key is optional and falls back to
//! its default; nested sections may be written either as tables or as
//! dotted keys (`agent.alpha = 0.2`). The same dotted keys are accepted as
//! command-line overrides (`--set agent.alpha=0.2`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{ActMode, AgentConfig};
use crate::env::{EnvPair, EnvSpec, GridSpec, ShiftConfig};
use crate::imitation::{DiscriminatorConfig, ScheduleConfig};
use crate::ratio::RatioConfig;
use crate::train::Objective;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Darc,
    Darail,
    Dail,
    IsR,
    IsAcl,
    SourceOnly,
    TargetOracle,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Darc,
        Method::Darail,
        Method::Dail,
        Method::IsR,
        Method::IsAcl,
        Method::SourceOnly,
        Method::TargetOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Darc => "darc",
            Method::Darail => "darail",
            Method::Dail => "dail",
            Method::IsR => "is-r",
            Method::IsAcl => "is-acl",
            Method::SourceOnly => "source-only",
            Method::TargetOracle => "target-oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }

    pub fn needs_expert(self) -> bool {
        matches!(self, Method::Darail | Method::Dail)
    }

    pub fn objective(self, eta: f64) -> Objective {
        match self {
            Method::Darc => Objective::Darc { eta },
            Method::Darail => Objective::Darail,
            Method::Dail => Objective::Dail,
            Method::IsR => Objective::IsR,
            Method::IsAcl => Objective::IsAcl,
            Method::SourceOnly => Objective::SourceOnly,
            Method::TargetOracle => Objective::TargetOracle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Training steps between evaluation points.
    pub period: usize,
    pub episodes: usize,
    pub mode: ActMode,
    /// Use the exact expected return on tabular environments instead of
    /// rollouts.
    pub exact: bool,
    /// Evaluation points averaged into a run's final value.
    pub final_window: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            period: 1000,
            episodes: 10,
            mode: ActMode::Greedy,
            exact: false,
            final_window: 1,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.period == 0 || self.episodes == 0 || self.final_window == 0 {
            return Err(Error::Config("eval.period, eval.episodes and eval.final_window must be positive".into()));
        }
        Ok(())
    }
}

/// Where DARAIL and DAIL get their expert demonstrations.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ExpertSource {
    /// Train DARC with the same config and seed first.
    #[default]
    Inline,
    /// A previous DARC output directory containing `seed_<n>/expert.json`.
    Dir(PathBuf),
}

impl ExpertSource {
    pub fn parse(s: &str) -> Self {
        if s == "inline" {
            ExpertSource::Inline
        } else {
            ExpertSource::Dir(PathBuf::from(s))
        }
    }
}

impl Serialize for ExpertSource {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExpertSource::Inline => s.serialize_str("inline"),
            ExpertSource::Dir(p) => s.serialize_str(&p.to_string_lossy()),
        }
    }
}

impl<'de> Deserialize<'de> for ExpertSource {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(ExpertSource::parse(&String::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub method: Method,
    pub env: EnvSpec,
    pub source_shift: ShiftConfig,
    pub target_shift: ShiftConfig,
    pub agent: AgentConfig,
    pub ratio: RatioConfig,
    pub discriminator: DiscriminatorConfig,
    pub schedule: ScheduleConfig,
    pub eval: EvalConfig,
    /// Weight on `Δr` in the DARC reward.
    pub eta: f64,
    /// Cumulative importance-weight window (0: per-step weight).
    pub n_step: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub expert: ExpertSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            method: Method::Darc,
            env: EnvSpec::WindyGrid(GridSpec::default()),
            source_shift: ShiftConfig::broken(0, 0.8),
            target_shift: ShiftConfig::none(),
            agent: AgentConfig::default(),
            ratio: RatioConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            schedule: ScheduleConfig::default(),
            eval: EvalConfig::default(),
            eta: 1.0,
            n_step: 0,
            seeds: vec![0],
            out_dir: PathBuf::from("runs"),
            expert: ExpertSource::Inline,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        self.ratio.validate()?;
        self.discriminator.validate()?;
        self.schedule.validate()?;
        self.eval.validate()?;
        if !(self.eta >= 1.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be at least 1, got {}", self.eta)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.pair()?;
        Ok(())
    }

    pub fn pair(&self) -> Result<EnvPair> {
        EnvPair::new(self.env.clone(), self.source_shift.clone(), self.target_shift.clone())
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("invalid TOML: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, overrides).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes to JSON")
    }
}

/// Apply `dotted.key=value`; the value is parsed as TOML, falling back to
/// a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {part:?} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn dotted_keys_and_overrides() {
        let text = r#"
method = "is-acl"
agent.alpha = 0.5
ratio.clip = [0.1, 10.0]
[env]
kind = "windy_grid"
width = 6
"#;
        let c = ExperimentConfig::from_toml_str(text, &["agent.gamma=0.9".into(), "name=abc".into()]).unwrap();
        assert_eq!(c.method, Method::IsAcl);
        assert_eq!(c.agent.alpha, 0.5);
        assert_eq!(c.agent.gamma, 0.9);
        assert_eq!(c.name, "abc");
        assert_eq!(c.ratio.clip.hi(), 10.0);
        match c.env {
            EnvSpec::WindyGrid(g) => assert_eq!(g.width, 6),
            _ => panic!("wrong env"),
        }
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for text in ["agent.alpha = -1.0", "ratio.clip = [2.0, 3.0]", "bogus = 1", "eta = 0.5"] {
            let e = ExperimentConfig::from_toml_str(text, &[]).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{text}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::default();
        c.expert = ExpertSource::Dir("runs/darc".into());
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string(), &[]).unwrap();
        assert_eq!(back, c);
    }
}
