//! Transition storage: fixed-capacity ring buffers and episode sets.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Domain, State, Transition};
use crate::{Error, Result};

/// FIFO ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Total number of pushes; the next write goes to `inserted % capacity`.
    inserted: u64,
    domain: Domain,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, domain: Domain) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            inserted: 0,
            domain,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            let slot = (self.inserted % self.capacity as u64) as usize;
            self.items[slot] = t;
        }
        self.inserted += 1;
    }

    /// Contents from oldest to newest.
    pub fn iter_ordered(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity {
            0
        } else {
            (self.inserted % self.capacity as u64) as usize
        };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if batch_size == 0 {
            return Ok(Vec::new());
        }
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer(self.domain));
        }
        Ok((0..batch_size)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }

    /// Uniform draws with replacement, each carrying up to `n` preceding
    /// transitions of the same episode (oldest first).
    pub fn sample_with_history<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<Sampled<'_>>> {
        if batch_size == 0 {
            return Ok(Vec::new());
        }
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer(self.domain));
        }
        Ok((0..batch_size)
            .map(|_| {
                let j = rng.random_range(0..self.items.len());
                Sampled {
                    transition: &self.items[j],
                    history: self.history(j, n),
                }
            })
            .collect())
    }

    /// Up to `n` transitions pushed immediately before slot `j` that belong
    /// to the same episode, oldest first.
    pub fn history(&self, j: usize, n: usize) -> Vec<&Transition> {
        if n == 0 {
            return Vec::new();
        }
        let len = self.items.len();
        let oldest = if len < self.capacity {
            0
        } else {
            (self.inserted % self.capacity as u64) as usize
        };
        let age_pos = (j + len - oldest) % len;
        let k = n.min(self.items[j].step).min(age_pos);
        (1..=k).rev().map(|d| &self.items[(j + len - d) % len]).collect()
    }

    /// Debug dump: `domain, s..., a, s'..., r, done`. Hidden rewards are
    /// written as empty fields and never read.
    pub fn dump_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let (ds, dn) = self
            .items
            .first()
            .map(|t| (t.state.len(), t.next_state.len()))
            .unwrap_or((0, 0));
        let mut header = vec!["domain".to_string()];
        header.extend((0..ds).map(|i| format!("s{i}")));
        header.push("a".into());
        header.extend((0..dn).map(|i| format!("next_s{i}")));
        header.push("r".into());
        header.push("done".into());
        let mut out = header.join(",");
        out.push('\n');
        for t in self.iter_ordered() {
            let mut row = vec![format!("{:?}", t.domain).to_lowercase()];
            row.extend(t.state.iter().map(|v| v.to_string()));
            row.push(t.action.to_string());
            row.extend(t.next_state.iter().map(|v| v.to_string()));
            row.push(if t.reward_hidden() {
                String::new()
            } else {
                t.reward().to_string()
            });
            row.push(t.done.to_string());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// A sampled transition with its in-episode predecessors.
#[derive(Debug, Clone)]
pub struct Sampled<'a> {
    pub transition: &'a Transition,
    pub history: Vec<&'a Transition>,
}

impl<'a> Sampled<'a> {
    pub fn single(transition: &'a Transition) -> Self {
        Sampled {
            transition,
            history: Vec::new(),
        }
    }
}

/// A transition with its domain label (target = 1).
#[derive(Debug, Clone, Copy)]
pub struct Labeled<'a> {
    pub transition: &'a Transition,
    pub domain: Domain,
}

/// Equal numbers of source and target draws: the first half of the batch
/// comes from `src`, the second half from `trg`.
pub fn sample_balanced<'a, R: Rng + ?Sized>(
    src: &'a ReplayBuffer,
    trg: &'a ReplayBuffer,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<Labeled<'a>>> {
    if batch_size % 2 != 0 {
        return Err(Error::Config(format!("balanced batch size must be even, got {batch_size}")));
    }
    if src.is_empty() {
        return Err(Error::EmptyBuffer(Domain::Src));
    }
    if trg.is_empty() {
        return Err(Error::EmptyBuffer(Domain::Trg));
    }
    let half = batch_size / 2;
    let mut batch = Vec::with_capacity(batch_size);
    for t in src.sample(half, rng)? {
        batch.push(Labeled {
            transition: t,
            domain: Domain::Src,
        });
    }
    for t in trg.sample(half, rng)? {
        batch.push(Labeled {
            transition: t,
            domain: Domain::Trg,
        });
    }
    Ok(batch)
}

pub type Trajectory = Vec<Transition>;

/// Whole episodes from one domain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub trajectories: Vec<Trajectory>,
}

impl TrajectorySet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append an episode after checking that it is chained and single-domain.
    pub fn push(&mut self, traj: Trajectory) -> Result<()> {
        for w in traj.windows(2) {
            if w[0].next_state != w[1].state {
                return Err(Error::Config("trajectory is not chained: next_state differs from following state".into()));
            }
        }
        if let Some(first) = traj.first() {
            if traj.iter().any(|t| t.domain != first.domain) {
                return Err(Error::Config("trajectory mixes domains".into()));
            }
        }
        self.trajectories.push(traj);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn n_transitions(&self) -> usize {
        self.trajectories.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.trajectories.iter().flatten()
    }

    /// Undiscounted return of every episode (rewards must be visible).
    pub fn returns(&self) -> Vec<f64> {
        self.trajectories
            .iter()
            .map(|t| t.iter().map(|x| x.reward()).sum())
            .collect()
    }
}

pub type StatePair = (State, State);

/// Project transitions to `(s, s')`, dropping actions and rewards.
pub fn state_pairs<'a>(transitions: impl IntoIterator<Item = &'a Transition>) -> Vec<StatePair> {
    transitions
        .into_iter()
        .map(|t| (t.state.clone(), t.next_state.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn tr(i: usize, domain: Domain) -> Transition {
        Transition::new(vec![i as f64], 0, vec![i as f64 + 1.0], 0.0, false, false, domain)
    }

    #[test]
    fn ring_evicts_oldest() {
        let mut b = ReplayBuffer::new(2, Domain::Src).unwrap();
        b.push(tr(0, Domain::Src));
        assert_eq!(b.len(), 1);
        b.push(tr(1, Domain::Src));
        b.push(tr(2, Domain::Src));
        assert_eq!(b.len(), 2);
        let kept: Vec<f64> = b.iter_ordered().map(|t| t.state[0]).collect();
        assert_eq!(kept, vec![1.0, 2.0]);
    }

    #[test]
    fn last_thousand_survive() {
        let mut b = ReplayBuffer::new(1000, Domain::Src).unwrap();
        for i in 0..10_000 {
            b.push(tr(i, Domain::Src));
        }
        let kept: Vec<usize> = b.iter_ordered().map(|t| t.state[0] as usize).collect();
        assert_eq!(kept, (9000..10_000).collect::<Vec<_>>());
    }

    #[test]
    fn history_stops_at_episode_start_and_eviction() {
        let mut b = ReplayBuffer::new(4, Domain::Src).unwrap();
        for (i, step) in [0, 1, 2, 0, 1].into_iter().enumerate() {
            b.push(tr(i, Domain::Src).at_step(step));
        }
        // slots: [4(step1), 1(step1), 2(step2), 3(step0)]; oldest is slot 1
        let h: Vec<f64> = b.history(2, 5).iter().map(|t| t.state[0]).collect();
        assert_eq!(h, vec![1.0]);
        let h: Vec<f64> = b.history(0, 5).iter().map(|t| t.state[0]).collect();
        assert_eq!(h, vec![3.0]);
        assert!(b.history(3, 5).is_empty());
        assert!(b.history(2, 0).is_empty());
    }

    #[test]
    fn sampling_edge_cases() {
        let mut rng = seed::rng(0);
        let mut b = ReplayBuffer::new(4, Domain::Trg).unwrap();
        assert!(matches!(b.sample(1, &mut rng), Err(Error::EmptyBuffer(Domain::Trg))));
        assert!(b.sample(0, &mut rng).unwrap().is_empty());
        b.push(tr(7, Domain::Trg));
        let batch = b.sample(4, &mut rng).unwrap();
        assert_eq!(batch.len(), 4);
        assert!(batch.iter().all(|t| t.state[0] == 7.0));
    }

    #[test]
    fn balanced_batches_split_evenly() {
        let mut rng = seed::rng(1);
        let mut s = ReplayBuffer::new(10, Domain::Src).unwrap();
        let mut t = ReplayBuffer::new(10, Domain::Trg).unwrap();
        assert!(matches!(sample_balanced(&s, &t, 2, &mut rng), Err(Error::EmptyBuffer(Domain::Src))));
        s.push(tr(0, Domain::Src));
        assert!(matches!(sample_balanced(&s, &t, 2, &mut rng), Err(Error::EmptyBuffer(Domain::Trg))));
        t.push(tr(1, Domain::Trg));
        let batch = sample_balanced(&s, &t, 2, &mut rng).unwrap();
        assert_eq!(batch[0].transition.state[0], 0.0);
        assert_eq!(batch[1].transition.state[0], 1.0);
        let batch = sample_balanced(&s, &t, 8, &mut rng).unwrap();
        assert_eq!(batch.iter().filter(|l| l.domain == Domain::Src).count(), 4);
        assert!(sample_balanced(&s, &t, 3, &mut rng).is_err());
    }

    #[test]
    fn pairs_drop_actions() {
        let mut set = TrajectorySet::new();
        set.push(vec![tr(0, Domain::Src), tr(1, Domain::Src)]).unwrap();
        assert_eq!(state_pairs(set.iter()), vec![(vec![0.0], vec![1.0]), (vec![1.0], vec![2.0])]);
        assert!(state_pairs(TrajectorySet::new().iter()).is_empty());
        assert!(set.push(vec![tr(0, Domain::Src), tr(5, Domain::Src)]).is_err());
    }

    #[test]
    fn dump_skips_hidden_rewards() {
        crate::env::firewall::reset();
        let dir = tempfile::tempdir().unwrap();
        let mut b = ReplayBuffer::new(4, Domain::Trg).unwrap();
        b.push(tr(0, Domain::Trg).hide_reward());
        let path = dir.path().join("buf.csv");
        b.dump_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "domain,s0,a,next_s0,r,done");
        assert_eq!(text.lines().nth(1).unwrap(), "trg,0,0,1,,false");
        assert_eq!(crate::env::firewall::target_reward_reads(), 0);
    }
}
