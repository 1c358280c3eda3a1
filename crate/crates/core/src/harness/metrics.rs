use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::mean_stderr;
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 11] = [
    "step",
    "source_train_return",
    "target_eval_return",
    "stderr",
    "rho_mean",
    "rho_median",
    "rho_max",
    "clip_frac",
    "disc_loss",
    "cls_loss_sa",
    "cls_loss_sas",
];

/// One evaluation point. Diagnostics a method does not have are `None`
/// and exported as empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: usize,
    pub source_train_return: f64,
    pub target_eval_return: f64,
    /// Standard error of the target evaluation.
    pub stderr: f64,
    pub rho_mean: Option<f64>,
    pub rho_median: Option<f64>,
    pub rho_max: Option<f64>,
    pub clip_frac: Option<f64>,
    pub disc_loss: Option<f64>,
    pub cls_loss_sa: Option<f64>,
    pub cls_loss_sas: Option<f64>,
}

impl EvalPoint {
    pub fn check_finite(&self) -> Result<()> {
        let required = [self.source_train_return, self.target_eval_return, self.stderr];
        let optional = [
            self.rho_mean,
            self.rho_median,
            self.rho_max,
            self.clip_frac,
            self.disc_loss,
            self.cls_loss_sa,
            self.cls_loss_sas,
        ];
        if required.iter().chain(optional.iter().flatten()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::numerical("evaluation", format!("non-finite metrics at step {}: {self:?}", self.step)))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub points: Vec<EvalPoint>,
}

impl RunMetrics {
    /// Mean of the last `window` points of a field.
    pub fn final_mean(&self, window: usize, field: impl Fn(&EvalPoint) -> f64) -> f64 {
        let n = self.points.len();
        let tail = &self.points[n.saturating_sub(window.max(1))..];
        if tail.is_empty() {
            return f64::NAN;
        }
        tail.iter().map(field).sum::<f64>() / tail.len() as f64
    }

    pub fn final_source(&self, window: usize) -> f64 {
        self.final_mean(window, |p| p.source_train_return)
    }

    pub fn final_target(&self, window: usize) -> f64 {
        self.final_mean(window, |p| p.target_eval_return)
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for p in &self.points {
            let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            w.write_record([
                p.step.to_string(),
                fmt_f64(p.source_train_return),
                fmt_f64(p.target_eval_return),
                fmt_f64(p.stderr),
                opt(p.rho_mean),
                opt(p.rho_median),
                opt(p.rho_max),
                opt(p.clip_frac),
                opt(p.disc_loss),
                opt(p.cls_loss_sa),
                opt(p.cls_loss_sas),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
    }

    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            path: origin.into(),
            detail,
        };
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| bad(e.to_string()))?;
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|e| bad(format!("column {}: {e}", CSV_HEADER[i])))
            };
            let opt = |i: usize| -> Result<Option<f64>> {
                if rec[i].is_empty() {
                    Ok(None)
                } else {
                    num(i).map(Some)
                }
            };
            points.push(EvalPoint {
                step: rec[0].parse().map_err(|e| bad(format!("column step: {e}")))?,
                source_train_return: num(1)?,
                target_eval_return: num(2)?,
                stderr: num(3)?,
                rho_mean: opt(4)?,
                rho_median: opt(5)?,
                rho_max: opt(6)?,
                clip_frac: opt(7)?,
                disc_loss: opt(8)?,
                cls_loss_sa: opt(9)?,
                cls_loss_sas: opt(10)?,
            });
        }
        Ok(RunMetrics { points })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, path)
    }
}

/// Shortest representation that parses back to the same `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Per-run summary written next to the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub final_source_train_return: f64,
    pub final_target_eval_return: f64,
    pub final_stderr: f64,
    pub wall_time_secs: f64,
    pub target_reward_reads: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFinal {
    pub seed: u64,
    pub source_train_return: f64,
    pub target_eval_return: f64,
}

/// Mean ± standard error over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub per_seed: Vec<SeedFinal>,
    pub source_train_mean: f64,
    pub source_train_stderr: f64,
    pub target_eval_mean: f64,
    pub target_eval_stderr: f64,
    /// Source-train minus target-eval return.
    pub gap_mean: f64,
    pub gap_stderr: f64,
}

impl Aggregate {
    pub fn from_finals(method: &str, per_seed: Vec<SeedFinal>) -> Self {
        let src: Vec<f64> = per_seed.iter().map(|s| s.source_train_return).collect();
        let trg: Vec<f64> = per_seed.iter().map(|s| s.target_eval_return).collect();
        let gap: Vec<f64> = src.iter().zip(&trg).map(|(a, b)| a - b).collect();
        let (source_train_mean, source_train_stderr) = mean_stderr(&src);
        let (target_eval_mean, target_eval_stderr) = mean_stderr(&trg);
        let (gap_mean, gap_stderr) = mean_stderr(&gap);
        Aggregate {
            method: method.to_string(),
            per_seed,
            source_train_mean,
            source_train_stderr,
            target_eval_mean,
            target_eval_stderr,
            gap_mean,
            gap_stderr,
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("aggregate serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
