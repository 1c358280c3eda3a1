use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Multipliers applied to the kernel parameters of one domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamScales {
    pub gravity_coeff: f64,
    pub friction_coeff: f64,
    pub wind_prob: f64,
    pub mass: f64,
}

impl Default for ParamScales {
    fn default() -> Self {
        ParamScales {
            gravity_coeff: 1.0,
            friction_coeff: 1.0,
            wind_prob: 1.0,
            mass: 1.0,
        }
    }
}

impl ParamScales {
    fn iter(&self) -> [(&'static str, f64); 4] {
        [
            ("gravity_coeff", self.gravity_coeff),
            ("friction_coeff", self.friction_coeff),
            ("wind_prob", self.wind_prob),
            ("mass", self.mass),
        ]
    }
}

/// Dynamics shift applied to one side of an environment pair.
///
/// A broken actuator freezes one action component to its null value (0)
/// with probability `p_f`, drawn independently at every step. Parameter
/// scales act on the transition kernel, not on the action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    pub broken_index: Option<usize>,
    pub p_f: f64,
    pub param_scales: ParamScales,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            broken_index: None,
            p_f: 0.0,
            param_scales: ParamScales::default(),
        }
    }
}

impl ShiftConfig {
    pub fn none() -> Self {
        Self::default()
    }

    /// Component `index` frozen with probability `p_f`.
    pub fn broken(index: usize, p_f: f64) -> Self {
        ShiftConfig {
            broken_index: Some(index),
            p_f,
            ..Self::default()
        }
    }

    pub fn validate(&self, action_dim: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_f) {
            return Err(Error::Config(format!("p_f must lie in [0, 1], got {}", self.p_f)));
        }
        if let Some(i) = self.broken_index {
            if i >= action_dim {
                return Err(Error::Config(format!(
                    "broken_index {i} out of range for {action_dim}-component actions"
                )));
            }
        }
        for (name, v) in self.param_scales.iter() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "param_scales.{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Probability that the broken component is frozen on a given step.
    pub fn freeze_prob(&self) -> f64 {
        if self.broken_index.is_some() {
            self.p_f
        } else {
            0.0
        }
    }

    /// Action actually executed by the plant for a commanded `action`.
    pub fn apply<R: Rng + ?Sized>(&self, action: &[f64], rng: &mut R) -> Vec<f64> {
        let mut executed = action.to_vec();
        if let Some(i) = self.broken_index {
            // Draw even when p_f is 0 or 1 so the stream position does not
            // depend on the shift magnitude.
            let u: f64 = rng.random();
            if u < self.p_f {
                executed[i] = 0.0;
            }
        }
        executed
    }

    /// The frozen variant of `action`, if this shift can freeze anything.
    pub fn frozen(&self, action: &[f64]) -> Option<Vec<f64>> {
        self.broken_index.map(|i| {
            let mut a = action.to_vec();
            a[i] = 0.0;
            a
        })
    }
}
