//! Dynamics ratio estimation from domain classifiers.
//!
//! Two binary classifiers estimate `p(trg | s, a)` and `p(trg | s, a, s')`.
//! With balanced source/target sampling, Bayes' rule gives
//!
//! ```text
//! log p_trg(s'|s,a) - log p_src(s'|s,a)
//!     = log p(trg|s,a,s') - log p(src|s,a,s') + log p(src|s,a) - log p(trg|s,a)
//! ```
//!
//! which is the log importance weight `Δr`; `ρ = exp(Δr)`.

mod exact;

pub use exact::{exact_ratio, ExactRatio};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{Domain, Features};
use crate::nn::{clamp_prob, Activation, Adam, Gradients, Head, Loss, Mlp};
use crate::replay::Labeled;
use crate::{Error, Result};

/// Anything that reports target-domain posteriors for `(s, a)` and `(s, a, s')`.
pub trait DomainClassifier {
    fn p_trg_sa(&self, s: &[f64], a: usize) -> f64;
    fn p_trg_sas(&self, s: &[f64], a: usize, next: &[f64]) -> f64;
}

fn log_odds(p: f64) -> f64 {
    let p = clamp_prob(p);
    p.ln() - (1.0 - p).ln()
}

/// Classifier estimate of `log p_trg(s'|s,a) - log p_src(s'|s,a)`.
pub fn delta_r<C: DomainClassifier + ?Sized>(model: &C, s: &[f64], a: usize, next: &[f64]) -> f64 {
    log_odds(model.p_trg_sas(s, a, next)) - log_odds(model.p_trg_sa(s, a))
}

/// `ρ = exp(Δr)`, clamped into `clip` when given.
pub fn importance_weight<C: DomainClassifier + ?Sized>(
    model: &C,
    s: &[f64],
    a: usize,
    next: &[f64],
    clip: Option<ClipBounds>,
) -> f64 {
    let rho = delta_r(model, s, a, next).exp();
    match clip {
        Some(c) => c.apply(rho),
        None => rho,
    }
}

/// Product of the last `min(n + 1, t + 1)` weights ending at index `t`.
pub fn cumulative_weight(rhos: &[f64], t: usize, n: usize) -> f64 {
    let start = t.saturating_sub(n);
    rhos[start..=t].iter().product()
}

/// Clipping interval `[lo, hi]` with `0 < lo <= 1 <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct ClipBounds {
    lo: f64,
    hi: f64,
}

impl ClipBounds {
    pub const DEFAULT: ClipBounds = ClipBounds { lo: 0.01, hi: 100.0 };
    pub const NARROW: ClipBounds = ClipBounds { lo: 0.1, hi: 10.0 };
    pub const WIDE: ClipBounds = ClipBounds { lo: 0.001, hi: 1000.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite()) {
            return Err(Error::Config(format!("clip bounds must satisfy 0 < lo <= 1 <= hi, got [{lo}, {hi}]")));
        }
        Ok(ClipBounds { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn apply(&self, rho: f64) -> f64 {
        rho.clamp(self.lo, self.hi)
    }

    /// Whether `rho` lies outside the interval (and would be clipped).
    pub fn clips(&self, rho: f64) -> bool {
        rho < self.lo || rho > self.hi
    }
}

impl Default for ClipBounds {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<[f64; 2]> for ClipBounds {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        ClipBounds::new(v[0], v[1])
    }
}

impl From<ClipBounds> for [f64; 2] {
    fn from(c: ClipBounds) -> Self {
        [c.lo, c.hi]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub lr: f64,
    /// Standard deviation of the Gaussian noise added to classifier inputs.
    pub noise_std: f64,
    pub batch_size: usize,
    pub clip: ClipBounds,
    /// Environment steps between classifier updates.
    pub update_period: usize,
    /// Environment steps before the learned `Δr` is used in rewards.
    pub warmup_steps: usize,
}

impl Default for RatioConfig {
    fn default() -> Self {
        RatioConfig {
            hidden: vec![32],
            activation: Activation::Relu,
            lr: 1e-3,
            noise_std: 0.1,
            batch_size: 128,
            clip: ClipBounds::DEFAULT,
            update_period: 1,
            warmup_steps: 0,
        }
    }
}

impl RatioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::Config("classifier hidden widths must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("classifier lr must be positive, got {}", self.lr)));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Config("classifier noise_std must be non-negative".into()));
        }
        if self.batch_size == 0 || self.batch_size % 2 != 0 {
            return Err(Error::Config(format!(
                "classifier batch_size must be positive and even, got {}",
                self.batch_size
            )));
        }
        if self.update_period == 0 {
            return Err(Error::Config("classifier update_period must be at least 1".into()));
        }
        ClipBounds::new(self.clip.lo, self.clip.hi)?;
        Ok(())
    }
}

/// The pair of domain classifiers with their optimizers.
#[derive(Debug, Clone)]
pub struct DensityRatioModel {
    features: Features,
    sa: Mlp,
    sas: Mlp,
    sa_opt: Adam,
    sas_opt: Adam,
    noise_std: f64,
}

impl DensityRatioModel {
    pub fn new<R: Rng + ?Sized>(features: Features, config: &RatioConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let widths = |input: usize| {
            let mut w = vec![input];
            w.extend(&config.hidden);
            w.push(1);
            w
        };
        let sa = Mlp::with_zero_head(&widths(features.sa_dim()), config.activation, Head::Sigmoid, rng)?;
        let sas = Mlp::with_zero_head(&widths(features.sas_dim()), config.activation, Head::Sigmoid, rng)?;
        Ok(DensityRatioModel {
            features,
            sa_opt: Adam::for_net(config.lr, &sa),
            sas_opt: Adam::for_net(config.lr, &sas),
            sa,
            sas,
            noise_std: config.noise_std,
        })
    }

    fn features(&self) -> &Features {
        &self.features
    }

    pub fn sa_net(&self) -> &Mlp {
        &self.sa
    }

    pub fn sas_net(&self) -> &Mlp {
        &self.sas
    }

    /// One Adam step per classifier on a balanced labeled batch; returns the
    /// pre-update mean cross-entropies `(loss_sa, loss_sas)`.
    pub fn train_step<R: Rng + ?Sized>(&mut self, batch: &[Labeled<'_>], rng: &mut R) -> Result<(f64, f64)> {
        if batch.is_empty() {
            return Err(Error::Config("classifier batch is empty".into()));
        }
        let n_trg = batch.iter().filter(|l| l.domain == Domain::Trg).count();
        if 2 * n_trg != batch.len() {
            return Err(Error::Config(format!(
                "classifier batch is unbalanced: {n_trg} target of {}",
                batch.len()
            )));
        }
        let f = *self.features();
        let noise = Normal::new(0.0, self.noise_std.max(f64::MIN_POSITIVE)).expect("valid normal");
        let w = 1.0 / batch.len() as f64;
        let mut g_sa = Gradients::zeros_like(&self.sa);
        let mut g_sas = Gradients::zeros_like(&self.sas);
        let (mut loss_sa, mut loss_sas) = (0.0, 0.0);
        for item in batch {
            let t = item.transition;
            let loss = Loss::BinaryCrossEntropy {
                label: item.domain.label(),
                weight: w,
            };
            let mut x_sa = f.sa(&t.state, t.action);
            let mut x_sas = f.sas(&t.state, t.action, &t.next_state);
            if self.noise_std > 0.0 {
                x_sa.iter_mut().for_each(|x| *x += noise.sample(rng));
                x_sas.iter_mut().for_each(|x| *x += noise.sample(rng));
            }
            loss_sa += self.sa.accumulate(&x_sa, &loss, &mut g_sa)?;
            loss_sas += self.sas.accumulate(&x_sas, &loss, &mut g_sas)?;
        }
        if !loss_sa.is_finite() || !loss_sas.is_finite() {
            return Err(Error::numerical(
                "classifier update",
                format!("loss_sa={loss_sa}, loss_sas={loss_sas}"),
            ));
        }
        self.sa_opt.step(&mut self.sa, &g_sa, "classifier (s,a) update")?;
        self.sas_opt.step(&mut self.sas, &g_sas, "classifier (s,a,s') update")?;
        Ok((loss_sa, loss_sas))
    }
}

impl DomainClassifier for DensityRatioModel {
    fn p_trg_sa(&self, s: &[f64], a: usize) -> f64 {
        self.sa.forward(&self.features().sa(s, a)).expect("classifier input width")[0]
    }

    fn p_trg_sas(&self, s: &[f64], a: usize, next: &[f64]) -> f64 {
        self.sas
            .forward(&self.features().sas(s, a, next))
            .expect("classifier input width")[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed {
        sa: f64,
        sas: f64,
    }

    impl DomainClassifier for Fixed {
        fn p_trg_sa(&self, _: &[f64], _: usize) -> f64 {
            self.sa
        }
        fn p_trg_sas(&self, _: &[f64], _: usize, _: &[f64]) -> f64 {
            self.sas
        }
    }

    #[test]
    fn symmetric_classifiers_give_zero() {
        let m = Fixed { sa: 0.5, sas: 0.5 };
        assert_eq!(delta_r(&m, &[0.0], 0, &[0.0]), 0.0);
        assert_eq!(importance_weight(&m, &[0.0], 0, &[0.0], None), 1.0);
    }

    #[test]
    fn hand_evaluated_decomposition() {
        let m = Fixed { sa: 0.5, sas: 0.8 };
        assert!((delta_r(&m, &[0.0], 0, &[0.0]) - 4f64.ln()).abs() < 1e-12);
        // the flipped final-line arrangement would give log 4 as well only if
        // p(trg|s,a) were 0.5; break that symmetry
        let m = Fixed { sa: 0.25, sas: 0.8 };
        let expect = (0.8f64 / 0.2).ln() + (0.75f64 / 0.25).ln();
        assert!((delta_r(&m, &[0.0], 0, &[0.0]) - expect).abs() < 1e-12);
    }

    #[test]
    fn clipping() {
        let c = ClipBounds::DEFAULT;
        assert_eq!(c.apply(500.0), 100.0);
        assert_eq!(c.apply(0.001), 0.01);
        assert_eq!(c.apply(3.0), 3.0);
        assert!(ClipBounds::new(2.0, 10.0).is_err());
        assert!(ClipBounds::new(0.1, 0.5).is_err());
        assert!(ClipBounds::new(0.0, 5.0).is_err());
    }

    #[test]
    fn cumulative_products() {
        let rhos = [2.0, 0.5, 3.0];
        assert_eq!(cumulative_weight(&rhos, 2, 0), 3.0);
        assert_eq!(cumulative_weight(&rhos, 2, 1), 1.5);
        assert_eq!(cumulative_weight(&rhos, 2, 10), 3.0);
        assert_eq!(cumulative_weight(&rhos, 0, 50), 2.0);
        assert_eq!(cumulative_weight(&[1.0; 20], 19, 10), 1.0);
    }

    #[test]
    fn clip_bounds_serialize_as_pair() {
        let text = serde_json::to_string(&ClipBounds::NARROW).unwrap();
        assert_eq!(text, "[0.1,10.0]");
        let back: ClipBounds = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ClipBounds::NARROW);
        assert!(serde_json::from_str::<ClipBounds>("[5.0,10.0]").is_err());
    }
}
