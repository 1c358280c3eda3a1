use crate::env::Transition;
use crate::imitation::Discriminator;
use crate::ratio::{cumulative_weight, delta_r, importance_weight, ClipBounds, DomainClassifier};

/// Per-transition training reward.
///
/// A `ratio` of `None` stands for a not-yet-trained ratio model: `ρ = 1`
/// and `Δr = 0`. Variants that use `ρ` multiply the per-step weights of the
/// transition's recorded history (see [`crate::replay::Sampled`]) before
/// clipping, which gives the cumulative n-step weight.
#[derive(Clone, Copy)]
pub enum RewardProvider<'a> {
    GroundTruth,
    /// `r + η Δr`, with `Δr` clamped to the log of `clip` when given.
    DarcModified {
        ratio: Option<&'a dyn DomainClassifier>,
        eta: f64,
        clip: Option<ClipBounds>,
    },
    /// `-log D + ρ (r + log D)`.
    RewardAugmented {
        ratio: Option<&'a dyn DomainClassifier>,
        disc: &'a Discriminator,
        clip: ClipBounds,
    },
    /// `-ρ log D`.
    DiscriminatorOnly {
        ratio: Option<&'a dyn DomainClassifier>,
        disc: &'a Discriminator,
        clip: ClipBounds,
    },
    /// `ρ r`.
    IsWeighted {
        ratio: Option<&'a dyn DomainClassifier>,
        clip: ClipBounds,
    },
}

/// Clipped (cumulative) importance weight of `t` given its predecessors.
pub fn clipped_weight(
    ratio: Option<&dyn DomainClassifier>,
    t: &Transition,
    history: &[&Transition],
    clip: ClipBounds,
) -> f64 {
    let Some(model) = ratio else {
        return 1.0;
    };
    if history.is_empty() {
        return importance_weight(model, &t.state, t.action, &t.next_state, Some(clip));
    }
    let rhos: Vec<f64> = history
        .iter()
        .copied()
        .chain(std::iter::once(t))
        .map(|x| importance_weight(model, &x.state, x.action, &x.next_state, None))
        .collect();
    clip.apply(cumulative_weight(&rhos, rhos.len() - 1, history.len()))
}

impl RewardProvider<'_> {
    pub fn reward(&self, t: &Transition, history: &[&Transition]) -> f64 {
        match *self {
            RewardProvider::GroundTruth => t.reward(),
            RewardProvider::DarcModified { ratio, eta, clip } => {
                let dr = match ratio {
                    None => 0.0,
                    Some(m) => {
                        let d = delta_r(m, &t.state, t.action, &t.next_state);
                        match clip {
                            Some(c) => d.clamp(c.lo().ln(), c.hi().ln()),
                            None => d,
                        }
                    }
                };
                t.reward() + eta * dr
            }
            RewardProvider::RewardAugmented { ratio, disc, clip } => {
                let rho = clipped_weight(ratio, t, history, clip);
                disc.reward_augmented(rho, t.reward(), &t.state, &t.next_state)
            }
            RewardProvider::DiscriminatorOnly { ratio, disc, clip } => {
                let rho = clipped_weight(ratio, t, history, clip);
                disc.dail_reward(rho, &t.state, &t.next_state)
            }
            RewardProvider::IsWeighted { ratio, clip } => clipped_weight(ratio, t, history, clip) * t.reward(),
        }
    }
}
