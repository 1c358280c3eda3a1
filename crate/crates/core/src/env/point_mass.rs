//! Point mass driven by a discrete set of force vectors.
//!
//! State is `[position..., velocity...]`. Integration is explicit Euler:
//! `pos' = pos + vel * dt`, `vel' = vel + (force - friction * vel - gravity * g0) * dt / mass`,
//! with `g0 = 0` in one dimension and `g0 = (0, 1)` in two. Positions are
//! confined to `[-bound, bound]`; hitting a wall zeroes that velocity component.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointMassSpec {
    pub dim: usize,
    pub mass: f64,
    pub gravity_coeff: f64,
    pub friction_coeff: f64,
    pub dt: f64,
    pub forces: Vec<Vec<f64>>,
    pub horizon: usize,
    /// Standard deviation of the initial position and velocity around the origin.
    pub init_noise: f64,
    pub goal: Vec<f64>,
    pub goal_radius: f64,
    pub bound: f64,
    pub step_penalty: f64,
    pub distance_penalty: f64,
    pub goal_reward: f64,
}

impl Default for PointMassSpec {
    fn default() -> Self {
        PointMassSpec {
            dim: 1,
            mass: 1.0,
            gravity_coeff: 1.0,
            friction_coeff: 0.1,
            dt: 0.1,
            forces: vec![vec![-1.0], vec![0.0], vec![1.0]],
            horizon: 100,
            init_noise: 0.01,
            goal: vec![1.0],
            goal_radius: 0.1,
            bound: 2.0,
            step_penalty: -0.1,
            distance_penalty: 0.0,
            goal_reward: 10.0,
        }
    }
}

impl PointMassSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::Config(format!("point mass dimension must be 1 or 2, got {}", self.dim)));
        }
        for (name, v) in [
            ("mass", self.mass),
            ("gravity_coeff", self.gravity_coeff),
            ("friction_coeff", self.friction_coeff),
            ("dt", self.dt),
            ("bound", self.bound),
        ] {
            // gravity and friction may be zero; mass, dt and bound may not
            let ok = match name {
                "gravity_coeff" | "friction_coeff" => v >= 0.0,
                _ => v > 0.0,
            };
            if !ok || !v.is_finite() {
                return Err(Error::Config(format!("point mass {name} invalid: {v}")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.forces.is_empty() {
            return Err(Error::Config("action set must be non-empty".into()));
        }
        if let Some(f) = self.forces.iter().find(|f| f.len() != self.dim) {
            return Err(Error::Config(format!(
                "force {f:?} does not have dimension {}",
                self.dim
            )));
        }
        if self.goal.len() != self.dim {
            return Err(Error::Config("goal dimension mismatch".into()));
        }
        if self.init_noise < 0.0 {
            return Err(Error::Config("init_noise must be non-negative".into()));
        }
        Ok(())
    }

    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..2 * self.dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                self.init_noise * z
            })
            .collect()
    }

    /// Deterministic Euler step under the given (scaled) physical parameters.
    pub fn integrate(&self, state: &[f64], force: &[f64], phys: Physics) -> Vec<f64> {
        let d = self.dim;
        let mut next = vec![0.0; 2 * d];
        for i in 0..d {
            let pos = state[i];
            let vel = state[d + i];
            let g0 = if d == 2 && i == 1 { 1.0 } else { 0.0 };
            let accel = (force[i] - phys.friction_coeff * vel - phys.gravity_coeff * g0) / phys.mass;
            let mut p = pos + vel * self.dt;
            let mut v = vel + accel * self.dt;
            if p > self.bound {
                p = self.bound;
                v = 0.0;
            } else if p < -self.bound {
                p = -self.bound;
                v = 0.0;
            }
            next[i] = p;
            next[d + i] = v;
        }
        next
    }

    pub fn reached_goal(&self, state: &[f64]) -> bool {
        self.goal_distance(state) <= self.goal_radius
    }

    fn goal_distance(&self, state: &[f64]) -> f64 {
        self.goal
            .iter()
            .zip(state)
            .map(|(g, p)| (g - p).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn reward(&self, next: &[f64]) -> f64 {
        let mut r = self.step_penalty - self.distance_penalty * self.goal_distance(next);
        if self.reached_goal(next) {
            r += self.goal_reward;
        }
        r
    }
}

/// Physical parameters after applying a shift's scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physics {
    pub mass: f64,
    pub gravity_coeff: f64,
    pub friction_coeff: f64,
}
