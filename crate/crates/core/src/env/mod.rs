//! Paired source/target environments.
//!
//! An [`EnvPair`] holds two [`Environment`]s built from the same [`EnvSpec`]
//! (hence the same states, actions, reward function and horizon) whose
//! transition kernels differ only through their [`ShiftConfig`]s.

mod grid;
mod kernel;
mod point_mass;
mod shift;
mod transition;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use grid::{cell_of, state_of, GridSpec, MoveSet};
pub use kernel::{Kernel, TabularMdp};
pub use point_mass::{Physics, PointMassSpec};
pub use shift::{ParamScales, ShiftConfig};
pub use transition::{firewall, Transition};

use crate::{Error, Result};

pub type State = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Src,
    Trg,
}

impl Domain {
    /// Classifier label: target is the positive class.
    pub fn label(self) -> f64 {
        match self {
            Domain::Src => 0.0,
            Domain::Trg => 1.0,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Src => "source",
            Domain::Trg => "target",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    WindyGrid(GridSpec),
    PointMass(PointMassSpec),
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnvSpec::WindyGrid(g) => g.validate(),
            EnvSpec::PointMass(p) => p.validate(),
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            EnvSpec::WindyGrid(g) => g.horizon,
            EnvSpec::PointMass(p) => p.horizon,
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            EnvSpec::WindyGrid(g) => g.moves.moves().len(),
            EnvSpec::PointMass(p) => p.forces.len(),
        }
    }

    pub fn action_dim(&self) -> usize {
        match self {
            EnvSpec::WindyGrid(_) => 2,
            EnvSpec::PointMass(p) => p.dim,
        }
    }

    /// Action vector for a discrete action index.
    pub fn action_vector(&self, action: usize) -> Vec<f64> {
        match self {
            EnvSpec::WindyGrid(g) => {
                let m = g.moves.moves()[action];
                vec![m[0] as f64, m[1] as f64]
            }
            EnvSpec::PointMass(p) => p.forces[action].clone(),
        }
    }

    /// Number of states for tabular environments.
    pub fn n_states(&self) -> Option<usize> {
        match self {
            EnvSpec::WindyGrid(g) => Some(g.n_states()),
            EnvSpec::PointMass(_) => None,
        }
    }

    pub fn state_index(&self, state: &[f64]) -> Option<usize> {
        match self {
            EnvSpec::WindyGrid(g) => {
                let c = cell_of(state);
                Some(g.index(c[0], c[1]))
            }
            EnvSpec::PointMass(_) => None,
        }
    }

    /// Shared reward function `r(s, a, s')`.
    pub fn reward(&self, _state: &[f64], _action: usize, next: &[f64]) -> f64 {
        match self {
            EnvSpec::WindyGrid(g) => g.reward(cell_of(next)),
            EnvSpec::PointMass(p) => p.reward(next),
        }
    }

    pub fn features(&self) -> Features {
        match self {
            EnvSpec::WindyGrid(g) => Features {
                state: StateEncoding::OneHot {
                    width: g.width,
                    n: g.n_states(),
                },
                n_actions: self.n_actions(),
            },
            EnvSpec::PointMass(p) => Features {
                state: StateEncoding::Raw { dim: 2 * p.dim },
                n_actions: self.n_actions(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateEncoding {
    /// One-hot over grid cells.
    OneHot { width: usize, n: usize },
    Raw { dim: usize },
}

/// Input encodings for the classifiers, discriminator and neural agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub state: StateEncoding,
    pub n_actions: usize,
}

impl Features {
    pub fn state_dim(&self) -> usize {
        match self.state {
            StateEncoding::OneHot { n, .. } => n,
            StateEncoding::Raw { dim } => dim,
        }
    }

    /// Number of discrete states, for one-hot encodings.
    pub fn n_states(&self) -> Option<usize> {
        match self.state {
            StateEncoding::OneHot { n, .. } => Some(n),
            StateEncoding::Raw { .. } => None,
        }
    }

    /// Tabular index of a state, for one-hot encodings.
    pub fn state_index(&self, state: &[f64]) -> Option<usize> {
        match self.state {
            StateEncoding::OneHot { width, .. } => {
                let c = cell_of(state);
                Some(c[1] * width + c[0])
            }
            StateEncoding::Raw { .. } => None,
        }
    }

    pub fn push_state(&self, state: &[f64], out: &mut Vec<f64>) {
        match self.state {
            StateEncoding::OneHot { width, n } => {
                let base = out.len();
                out.resize(base + n, 0.0);
                let c = cell_of(state);
                out[base + c[1] * width + c[0]] = 1.0;
            }
            StateEncoding::Raw { .. } => out.extend_from_slice(state),
        }
    }

    pub fn push_action(&self, action: usize, out: &mut Vec<f64>) {
        let base = out.len();
        out.resize(base + self.n_actions, 0.0);
        out[base + action] = 1.0;
    }

    pub fn sa_dim(&self) -> usize {
        self.state_dim() + self.n_actions
    }

    pub fn sas_dim(&self) -> usize {
        2 * self.state_dim() + self.n_actions
    }

    pub fn ss_dim(&self) -> usize {
        2 * self.state_dim()
    }

    pub fn sa(&self, s: &[f64], a: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.sa_dim());
        self.push_state(s, &mut v);
        self.push_action(a, &mut v);
        v
    }

    pub fn sas(&self, s: &[f64], a: usize, next: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.sas_dim());
        self.push_state(s, &mut v);
        self.push_action(a, &mut v);
        self.push_state(next, &mut v);
        v
    }

    pub fn ss(&self, s: &[f64], next: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.ss_dim());
        self.push_state(s, &mut v);
        self.push_state(next, &mut v);
        v
    }

    pub fn state(&self, s: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.state_dim());
        self.push_state(s, &mut v);
        v
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next_state: State,
    pub reward: f64,
    /// Goal or hazard reached.
    pub terminal: bool,
    /// Terminal, or the horizon is exhausted.
    pub done: bool,
}

/// One domain of an environment pair: the shared spec plus its shift.
#[derive(Debug, Clone)]
pub struct Environment {
    spec: EnvSpec,
    shift: ShiftConfig,
    domain: Domain,
    elapsed: usize,
}

impl Environment {
    pub fn new(spec: EnvSpec, shift: ShiftConfig, domain: Domain) -> Result<Self> {
        spec.validate()?;
        shift.validate(spec.action_dim())?;
        match &spec {
            EnvSpec::WindyGrid(_) => {
                let s = &shift.param_scales;
                if s.gravity_coeff != 1.0 || s.friction_coeff != 1.0 || s.mass != 1.0 {
                    return Err(Error::Config(
                        "windy grid only supports the wind_prob parameter scale".into(),
                    ));
                }
            }
            EnvSpec::PointMass(_) => {
                if shift.param_scales.wind_prob != 1.0 {
                    return Err(Error::Config("point mass has no wind_prob parameter".into()));
                }
            }
        }
        Ok(Environment {
            spec,
            shift,
            domain,
            elapsed: 0,
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn shift(&self) -> &ShiftConfig {
        &self.shift
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn n_actions(&self) -> usize {
        self.spec.n_actions()
    }

    pub fn horizon(&self) -> usize {
        self.spec.horizon()
    }

    pub fn features(&self) -> Features {
        self.spec.features()
    }

    fn wind_prob(&self) -> f64 {
        match &self.spec {
            EnvSpec::WindyGrid(g) => (g.wind_prob * self.shift.param_scales.wind_prob).min(1.0),
            EnvSpec::PointMass(_) => 0.0,
        }
    }

    pub fn physics(&self) -> Option<Physics> {
        match &self.spec {
            EnvSpec::PointMass(p) => {
                let s = &self.shift.param_scales;
                Some(Physics {
                    mass: p.mass * s.mass,
                    gravity_coeff: p.gravity_coeff * s.gravity_coeff,
                    friction_coeff: p.friction_coeff * s.friction_coeff,
                })
            }
            EnvSpec::WindyGrid(_) => None,
        }
    }

    /// Draw an initial state and restart the horizon clock.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> State {
        self.elapsed = 0;
        match &self.spec {
            EnvSpec::WindyGrid(g) => match g.start {
                Some(c) => state_of(c),
                None => {
                    let i = rng.random_range(0..g.n_states());
                    state_of(g.cell(i))
                }
            },
            EnvSpec::PointMass(p) => p.initial_state(rng),
        }
    }

    /// Sample `s'` and the shared reward without touching the horizon clock.
    pub fn sample_next<R: Rng + ?Sized>(&self, state: &[f64], action: usize, rng: &mut R) -> (State, f64, bool) {
        let commanded = self.spec.action_vector(action);
        let executed = self.shift.apply(&commanded, rng);
        let next = match &self.spec {
            EnvSpec::WindyGrid(g) => {
                let mv = [executed[0] as i64, executed[1] as i64];
                state_of(g.sample_successor(cell_of(state), mv, self.wind_prob(), rng))
            }
            EnvSpec::PointMass(p) => p.integrate(state, &executed, self.physics().expect("point mass")),
        };
        let terminal = self.is_terminal(&next);
        let reward = self.spec.reward(state, action, &next);
        (next, reward, terminal)
    }

    pub fn is_terminal(&self, state: &[f64]) -> bool {
        match &self.spec {
            EnvSpec::WindyGrid(g) => g.is_terminal_cell(cell_of(state)),
            EnvSpec::PointMass(p) => p.reached_goal(state),
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, state: &[f64], action: usize, rng: &mut R) -> Step {
        let (next_state, reward, terminal) = self.sample_next(state, action, rng);
        self.elapsed += 1;
        Step {
            next_state,
            reward,
            terminal,
            done: terminal || self.elapsed >= self.horizon(),
        }
    }

    /// Exact kernel `P[s, a, s']` with the actuator shift marginalized out.
    pub fn transition_matrix(&self) -> Result<Kernel> {
        let g = match &self.spec {
            EnvSpec::WindyGrid(g) => g,
            EnvSpec::PointMass(_) => {
                return Err(Error::Unsupported(
                    "transition_matrix requires a tabular (windy grid) environment".into(),
                ))
            }
        };
        let n = g.n_states();
        let n_actions = self.n_actions();
        let wind = self.wind_prob();
        let q = self.shift.freeze_prob();
        let mut kernel = Kernel::zeros(n, n_actions);
        for s in 0..n {
            let c = g.cell(s);
            for a in 0..n_actions {
                let commanded = self.spec.action_vector(a);
                let mut variants = vec![(commanded.clone(), 1.0 - q)];
                if let Some(frozen) = self.shift.frozen(&commanded) {
                    variants.push((frozen, q));
                }
                for (exec, w) in variants {
                    if w == 0.0 {
                        continue;
                    }
                    let mv = [exec[0] as i64, exec[1] as i64];
                    for (next, p) in g.successors(c, mv, wind) {
                        *kernel.get_mut(s, a, g.index(next[0], next[1])) += w * p;
                    }
                }
            }
        }
        Ok(kernel)
    }

    /// Kernel plus rewards, termination flags and start distribution.
    pub fn tabular_mdp(&self) -> Result<TabularMdp> {
        let kernel = self.transition_matrix()?;
        let g = match &self.spec {
            EnvSpec::WindyGrid(g) => g,
            EnvSpec::PointMass(_) => unreachable!("transition_matrix rejects point mass"),
        };
        let n = g.n_states();
        let n_actions = self.n_actions();
        let mut mdp = TabularMdp::new(kernel, g.horizon);
        for s in 0..n {
            let absorbing = g.is_terminal_cell(g.cell(s));
            for a in 0..n_actions {
                for next in 0..n {
                    let c = g.cell(next);
                    let i = mdp.index(s, a, next);
                    // absorbing cells are never stepped from within an episode
                    mdp.reward[i] = if absorbing { 0.0 } else { g.reward(c) };
                    mdp.terminal[i] = absorbing || g.is_terminal_cell(c);
                }
            }
        }
        mdp.start = vec![0.0; n];
        match g.start {
            Some(c) => mdp.start[g.index(c[0], c[1])] = 1.0,
            None => mdp.start.iter_mut().for_each(|p| *p = 1.0 / n as f64),
        }
        Ok(mdp)
    }
}

/// Source and target environments sharing a spec.
#[derive(Debug, Clone)]
pub struct EnvPair {
    pub source: Environment,
    pub target: Environment,
}

impl EnvPair {
    pub fn new(spec: EnvSpec, source_shift: ShiftConfig, target_shift: ShiftConfig) -> Result<Self> {
        Ok(EnvPair {
            source: Environment::new(spec.clone(), source_shift, Domain::Src)?,
            target: Environment::new(spec, target_shift, Domain::Trg)?,
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        self.source.spec()
    }

    pub fn get(&self, domain: Domain) -> &Environment {
        match domain {
            Domain::Src => &self.source,
            Domain::Trg => &self.target,
        }
    }

    pub fn get_mut(&mut self, domain: Domain) -> &mut Environment {
        match domain {
            Domain::Src => &mut self.source,
            Domain::Trg => &mut self.target,
        }
    }
}
