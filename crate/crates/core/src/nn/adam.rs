use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp};
use crate::{Error, Result};

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn for_net(lr: f64, net: &Mlp) -> Self {
        Self::new(lr, net.params().len())
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Apply one update. Non-finite gradients abort without touching the
    /// parameters.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients, context: &str) -> Result<()> {
        if grads.0.len() != self.m.len() {
            return Err(Error::Shape {
                expected: self.m.len(),
                got: grads.0.len(),
            });
        }
        if !grads.is_finite() {
            return Err(Error::numerical(context, "non-finite gradient"));
        }
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in net
            .params_mut()
            .iter_mut()
            .zip(&grads.0)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / b1t) / ((*v / b2t).sqrt() + self.eps);
        }
        if !net.is_finite() {
            return Err(Error::numerical(context, "non-finite parameters after update"));
        }
        Ok(())
    }
}
