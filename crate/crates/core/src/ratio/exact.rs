use crate::env::{EnvPair, Kernel};
use crate::{Error, Result};

/// True `p_trg(s'|s,a) / p_src(s'|s,a)` from the two tabular kernels.
#[derive(Debug, Clone)]
pub struct ExactRatio {
    src: Kernel,
    trg: Kernel,
}

impl ExactRatio {
    pub fn from_pair(pair: &EnvPair) -> Result<Self> {
        Ok(ExactRatio {
            src: pair.source.transition_matrix()?,
            trg: pair.target.transition_matrix()?,
        })
    }

    pub fn from_kernels(src: Kernel, trg: Kernel) -> Result<Self> {
        if src.n_states != trg.n_states || src.n_actions != trg.n_actions {
            return Err(Error::Shape {
                expected: src.as_flat().len(),
                got: trg.as_flat().len(),
            });
        }
        Ok(ExactRatio { src, trg })
    }

    pub fn source(&self) -> &Kernel {
        &self.src
    }

    pub fn target(&self) -> &Kernel {
        &self.trg
    }

    /// Ratio for a triple. Outside both supports the ratio is taken as 1;
    /// target mass where the source has none is a support violation.
    pub fn ratio(&self, s: usize, a: usize, next: usize) -> Result<f64> {
        let p_src = self.src.prob(s, a, next);
        let p_trg = self.trg.prob(s, a, next);
        if p_src > 0.0 {
            Ok(p_trg / p_src)
        } else if p_trg > 0.0 {
            Err(Error::SupportViolation { s, a, next, p_trg })
        } else {
            Ok(1.0)
        }
    }
}

/// One-off exact ratio; builds both kernels on every call.
pub fn exact_ratio(pair: &EnvPair, s: usize, a: usize, next: usize) -> Result<f64> {
    ExactRatio::from_pair(pair)?.ratio(s, a, next)
}
