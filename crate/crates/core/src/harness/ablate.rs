use std::path::Path;

use crate::ratio::ClipBounds;
use crate::{Error, Result};

use super::{run_methods, write_results, ExperimentConfig, Method, MethodResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// Clipping interval of the importance weight.
    Clip,
    /// Freeze probability of the broken actuator.
    Pf,
    /// Weight on `Δr` in the DARC reward.
    Eta,
    /// Generator steps per discriminator update.
    K,
    /// Cumulative importance-weight window.
    N,
}

impl Sweep {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "clip" => Ok(Sweep::Clip),
            "pf" => Ok(Sweep::Pf),
            "eta" => Ok(Sweep::Eta),
            "k" => Ok(Sweep::K),
            "n" => Ok(Sweep::N),
            _ => Err(Error::Config(format!("unknown sweep {s:?}; expected clip, pf, eta, k or n"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sweep::Clip => "clip",
            Sweep::Pf => "pf",
            Sweep::Eta => "eta",
            Sweep::K => "k",
            Sweep::N => "n",
        }
    }

    /// Methods compared in the sweep unless overridden.
    pub fn default_methods(self) -> Vec<Method> {
        match self {
            Sweep::Clip => vec![Method::Darail, Method::IsAcl],
            Sweep::Pf => vec![Method::Darc, Method::Darail],
            Sweep::Eta => vec![Method::Darc],
            Sweep::K | Sweep::N => vec![Method::Darail],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub config: ExperimentConfig,
}

/// The configurations of a sweep, derived from `base`.
pub fn sweep_points(base: &ExperimentConfig, sweep: Sweep) -> Result<Vec<SweepPoint>> {
    let point = |label: String, f: &dyn Fn(&mut ExperimentConfig)| {
        let mut config = base.clone();
        f(&mut config);
        SweepPoint { label, config }
    };
    let points = match sweep {
        Sweep::Clip => [ClipBounds::NARROW, ClipBounds::DEFAULT, ClipBounds::WIDE]
            .into_iter()
            .map(|c| point(format!("clip_{}_{}", c.lo(), c.hi()), &|cfg| cfg.ratio.clip = c))
            .collect(),
        Sweep::Pf => {
            let broken_source = base.source_shift.broken_index.is_some();
            if !broken_source && base.target_shift.broken_index.is_none() {
                return Err(Error::Config("p_f sweep needs a broken actuator in one domain".into()));
            }
            [0.2, 0.5, 0.8]
                .into_iter()
                .map(|p| {
                    point(format!("pf_{p}"), &|cfg| {
                        if broken_source {
                            cfg.source_shift.p_f = p;
                        } else {
                            cfg.target_shift.p_f = p;
                        }
                    })
                })
                .collect()
        }
        Sweep::Eta => [1.0, 1.5, 2.0]
            .into_iter()
            .map(|e| point(format!("eta_{e}"), &|cfg| cfg.eta = e))
            .collect(),
        Sweep::K => [10, 50, 500, 1000]
            .into_iter()
            .map(|k| point(format!("k_{k}"), &|cfg| cfg.schedule.discriminator_period = k))
            .collect(),
        Sweep::N => [0, 10, 50]
            .into_iter()
            .map(|n| point(format!("n_{n}"), &|cfg| cfg.n_step = n))
            .collect(),
    };
    Ok(points)
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub label: String,
    pub results: Vec<MethodResult>,
}

/// Run every point of the sweep; when `out` is given, each point is
/// written under `out/<label>/`.
pub fn run_sweep(base: &ExperimentConfig, sweep: Sweep, methods: &[Method], out: Option<&Path>) -> Result<Vec<SweepResult>> {
    let mut all = Vec::new();
    for p in sweep_points(base, sweep)? {
        let results = run_methods(&p.config, methods)?;
        if let Some(root) = out {
            write_results(&root.join(&p.label), &p.config, &results)?;
        }
        all.push(SweepResult { label: p.label, results });
    }
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_values() {
        let base = ExperimentConfig::default();
        let clip = sweep_points(&base, Sweep::Clip).unwrap();
        assert_eq!(clip.len(), 3);
        assert_eq!(clip[2].config.ratio.clip, ClipBounds::WIDE);
        let pf = sweep_points(&base, Sweep::Pf).unwrap();
        let values: Vec<f64> = pf.iter().map(|p| p.config.source_shift.p_f).collect();
        assert_eq!(values, vec![0.2, 0.5, 0.8]);
        assert_eq!(sweep_points(&base, Sweep::K).unwrap().len(), 4);
        assert_eq!(sweep_points(&base, Sweep::N).unwrap()[2].config.n_step, 50);
        assert!(Sweep::parse("bogus").is_err());
    }
}
