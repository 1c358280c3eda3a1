use serde::{Deserialize, Serialize};

use super::{Domain, State};

/// One `(s, a, s', r, done)` record tagged with the domain that produced it.
///
/// Target-domain rewards can be hidden: the stored value becomes NaN and
/// every read through [`Transition::reward`] is counted by [`firewall`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: State,
    pub action: usize,
    pub next_state: State,
    reward: f64,
    /// Goal or hazard reached; no bootstrapping past this transition.
    pub terminal: bool,
    /// Terminal or truncated by the horizon.
    pub done: bool,
    pub domain: Domain,
    /// Position within its episode, starting at 0.
    pub step: usize,
    reward_hidden: bool,
}

impl Transition {
    pub fn new(
        state: State,
        action: usize,
        next_state: State,
        reward: f64,
        terminal: bool,
        done: bool,
        domain: Domain,
    ) -> Self {
        Transition {
            state,
            action,
            next_state,
            reward,
            terminal,
            done,
            domain,
            step: 0,
            reward_hidden: false,
        }
    }

    pub fn at_step(mut self, step: usize) -> Self {
        self.step = step;
        self
    }

    /// Drop the reward; used for target transitions outside the oracle method.
    pub fn hide_reward(mut self) -> Self {
        self.reward = f64::NAN;
        self.reward_hidden = true;
        self
    }

    pub fn reward_hidden(&self) -> bool {
        self.reward_hidden
    }

    pub fn reward(&self) -> f64 {
        if self.reward_hidden {
            firewall::record_read();
        }
        self.reward
    }
}

/// Counts reads of hidden target rewards on the current thread.
///
/// Runs execute on a single thread, so the count observed before and after
/// a run isolates that run's reads even when seeds run in parallel.
pub mod firewall {
    use std::cell::Cell;

    thread_local! {
        static READS: Cell<u64> = const { Cell::new(0) };
    }

    pub(super) fn record_read() {
        READS.with(|r| r.set(r.get() + 1));
    }

    pub fn target_reward_reads() -> u64 {
        READS.with(|r| r.get())
    }

    pub fn reset() {
        READS.with(|r| r.set(0));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_reward_reads_are_counted() {
        firewall::reset();
        let t = Transition::new(vec![0.0], 0, vec![1.0], 2.0, false, false, Domain::Trg);
        assert_eq!(t.reward(), 2.0);
        assert_eq!(firewall::target_reward_reads(), 0);
        let h = t.hide_reward();
        assert!(h.reward().is_nan());
        assert_eq!(firewall::target_reward_reads(), 1);
    }
}
