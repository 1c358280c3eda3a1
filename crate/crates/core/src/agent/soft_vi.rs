use crate::env::{Environment, TabularMdp};
use crate::nn::{logsumexp, softmax};
use crate::{Error, Result};

/// Exact finite-horizon soft values at the first decision stage.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftSolution {
    pub n_actions: usize,
    /// `V(s)`.
    pub v: Vec<f64>,
    /// `Q(s, a)` at index `s * n_actions + a`.
    pub q: Vec<f64>,
    /// `π(a | s)` at index `s * n_actions + a`.
    pub policy: Vec<f64>,
}

impl SoftSolution {
    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn policy_row(&self, s: usize) -> &[f64] {
        &self.policy[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Policy as one row per state.
    pub fn policy_table(&self) -> Vec<Vec<f64>> {
        self.policy.chunks(self.n_actions).map(<[f64]>::to_vec).collect()
    }
}

/// `α log Σ_a exp(q_a / α)`.
pub fn soft_max_value(q: &[f64], alpha: f64) -> f64 {
    let scaled: Vec<f64> = q.iter().map(|x| x / alpha).collect();
    alpha * logsumexp(&scaled)
}

/// `softmax(q / α)`.
pub fn soft_policy(q: &[f64], alpha: f64) -> Vec<f64> {
    let scaled: Vec<f64> = q.iter().map(|x| x / alpha).collect();
    softmax(&scaled)
}

/// Backward induction over the horizon with the soft backup
/// `V(s) = α log Σ_a exp(Q(s,a)/α)`, `Q(s,a) = E[r + γ V(s')]`, where no
/// value is carried past terminal transitions.
pub fn soft_value_iteration(mdp: &TabularMdp, alpha: f64, gamma: f64) -> Result<SoftSolution> {
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Config(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let mut v = vec![0.0; n];
    let mut q = vec![0.0; n * na];
    for _ in 0..mdp.horizon {
        for s in 0..n {
            for a in 0..na {
                let mut total = 0.0;
                for (next, &p) in mdp.kernel.row(s, a).iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let i = mdp.index(s, a, next);
                    let cont = if mdp.terminal[i] { 0.0 } else { gamma * v[next] };
                    total += p * (mdp.reward[i] + cont);
                }
                q[s * na + a] = total;
            }
        }
        for s in 0..n {
            v[s] = soft_max_value(&q[s * na..(s + 1) * na], alpha);
        }
    }
    let policy = q.chunks(na).flat_map(|row| soft_policy(row, alpha)).collect();
    Ok(SoftSolution {
        n_actions: na,
        v,
        q,
        policy,
    })
}

/// Soft value iteration on the exact kernel of a tabular environment.
pub fn soft_value_iteration_env(env: &Environment, alpha: f64, gamma: f64) -> Result<SoftSolution> {
    soft_value_iteration(&env.tabular_mdp()?, alpha, gamma)
}
