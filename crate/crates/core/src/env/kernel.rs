use crate::{Error, Result};

/// Dense transition kernel indexed `[state, action, next_state]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub n_states: usize,
    pub n_actions: usize,
    probs: Vec<f64>,
}

impl Kernel {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Kernel {
            n_states,
            n_actions,
            probs: vec![0.0; n_states * n_actions * n_states],
        }
    }

    /// Build from a flat `[s, a, s']` array.
    pub fn from_flat(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        let expected = n_states * n_actions * n_states;
        if probs.len() != expected {
            return Err(Error::Shape {
                expected,
                got: probs.len(),
            });
        }
        Ok(Kernel {
            n_states,
            n_actions,
            probs,
        })
    }

    fn offset(&self, s: usize, a: usize) -> usize {
        (s * self.n_actions + a) * self.n_states
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.probs[self.offset(s, a) + next]
    }

    pub fn get_mut(&mut self, s: usize, a: usize, next: usize) -> &mut f64 {
        let o = self.offset(s, a);
        &mut self.probs[o + next]
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let o = self.offset(s, a);
        &self.probs[o..o + self.n_states]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.probs
    }
}

/// A finite MDP: kernel, per-transition rewards and termination flags,
/// start distribution and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub kernel: Kernel,
    pub reward: Vec<f64>,
    pub terminal: Vec<bool>,
    pub start: Vec<f64>,
    pub horizon: usize,
}

impl TabularMdp {
    pub fn new(kernel: Kernel, horizon: usize) -> Self {
        let len = kernel.as_flat().len();
        let n = kernel.n_states;
        let mut start = vec![0.0; n];
        if n > 0 {
            start[0] = 1.0;
        }
        TabularMdp {
            kernel,
            reward: vec![0.0; len],
            terminal: vec![false; len],
            start,
            horizon,
        }
    }

    pub fn n_states(&self) -> usize {
        self.kernel.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.kernel.n_actions
    }

    pub fn index(&self, s: usize, a: usize, next: usize) -> usize {
        (s * self.kernel.n_actions + a) * self.kernel.n_states + next
    }

    /// Expected undiscounted return of a stationary stochastic policy
    /// `policy[s][a]` over the horizon, by forward propagation of the
    /// state distribution.
    pub fn policy_return(&self, policy: &[Vec<f64>]) -> f64 {
        let n = self.n_states();
        let mut dist = self.start.clone();
        let mut total = 0.0;
        for _ in 0..self.horizon {
            let mut next_dist = vec![0.0; n];
            for s in 0..n {
                if dist[s] == 0.0 {
                    continue;
                }
                for (a, &pa) in policy[s].iter().enumerate() {
                    let w = dist[s] * pa;
                    if w == 0.0 {
                        continue;
                    }
                    for s2 in 0..n {
                        let p = self.kernel.prob(s, a, s2);
                        if p == 0.0 {
                            continue;
                        }
                        let i = self.index(s, a, s2);
                        total += w * p * self.reward[i];
                        if !self.terminal[i] {
                            next_dist[s2] += w * p;
                        }
                    }
                }
            }
            dist = next_dist;
        }
        total
    }
}
