//! Off-dynamics reinforcement learning on paired source/target environments.
//!
//! A policy is trained in a *source* environment and deployed in a *target*
//! environment that shares states, actions and rewards but differs in its
//! transition kernel. The crate provides:
//!
//! * [`env`]: tabular and continuous-state environment pairs with broken
//!   actuators and scaled physical parameters, plus exact kernels for the
//!   tabular case;
//! * [`nn`]: a small dense network with hand-written backprop and Adam;
//! * [`replay`]: replay buffers and trajectory sets;
//! * [`ratio`]: classifier-based estimates of the dynamics log-ratio and
//!   importance weights, with an exact tabular oracle;
//! * [`agent`]: maximum-entropy (soft) Q-learning with pluggable reward
//!   sources and an exact soft value iteration solver;
//! * [`imitation`]: importance-weighted adversarial imitation from
//!   observation with the reward-augmented estimator;
//! * [`train`]: the training loop shared by every method;
//! * [`harness`]: configuration, experiment orchestration and metrics export.

pub mod agent;
pub mod env;
pub mod error;
pub mod harness;
pub mod imitation;
pub mod nn;
pub mod ratio;
pub mod replay;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
