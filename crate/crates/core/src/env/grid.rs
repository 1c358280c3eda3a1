//! Windy gridworld with optional hazard cells.
//!
//! Cells are addressed `(x, y)` with `x` the column and `y` the row; the
//! tabular index of a cell is `y * width + x`. A step applies the executed
//! move (clamped to the grid), then, if the destination row is windy, a
//! lateral push of `wind_direction` columns with probability `wind_prob`.
//! Goal and hazard cells are terminal.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveSet {
    /// stay, up, down, left, right
    Compass,
    /// the four diagonal moves; every action drives both axes
    Diagonal,
    /// all nine moves of a chess king, stay first
    King,
}

impl MoveSet {
    pub fn moves(self) -> Vec<[i64; 2]> {
        match self {
            MoveSet::Compass => vec![[0, 0], [0, 1], [0, -1], [-1, 0], [1, 0]],
            MoveSet::Diagonal => vec![[1, 1], [-1, 1], [1, -1], [-1, -1]],
            MoveSet::King => {
                let mut v = vec![[0, 0]];
                for dy in [1, 0, -1] {
                    for dx in [-1, 0, 1] {
                        if dx != 0 || dy != 0 {
                            v.push([dx, dy]);
                        }
                    }
                }
                v
            }
        }
    }

    pub fn names(self) -> Vec<&'static str> {
        match self {
            MoveSet::Compass => vec!["stay", "up", "down", "left", "right"],
            MoveSet::Diagonal => vec!["up-right", "up-left", "down-right", "down-left"],
            MoveSet::King => vec![
                "stay",
                "up-left",
                "up",
                "up-right",
                "left",
                "right",
                "down-left",
                "down",
                "down-right",
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    /// Fixed start cell; `None` (written `"uniform"`) draws the start
    /// uniformly over all cells.
    #[serde(with = "start_cell")]
    pub start: Option<[usize; 2]>,
    pub goal: [usize; 2],
    pub moves: MoveSet,
    pub wind_prob: f64,
    /// Rows subject to wind; `None` means every row.
    pub windy_rows: Option<Vec<usize>>,
    pub wind_direction: i64,
    pub hazards: Vec<[usize; 2]>,
    pub step_penalty: f64,
    pub goal_reward: f64,
    pub hazard_reward: f64,
    pub horizon: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            width: 5,
            height: 5,
            start: Some([0, 0]),
            goal: [4, 4],
            moves: MoveSet::Compass,
            wind_prob: 0.0,
            windy_rows: None,
            wind_direction: 1,
            hazards: Vec::new(),
            step_penalty: -1.0,
            goal_reward: 10.0,
            hazard_reward: -10.0,
            horizon: 25,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("grid width and height must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.wind_prob) {
            return Err(Error::Config(format!("wind_prob must lie in [0, 1], got {}", self.wind_prob)));
        }
        if !self.inside(self.goal) {
            return Err(Error::Config(format!("goal {:?} lies outside the grid", self.goal)));
        }
        if let Some(s) = self.start {
            if !self.inside(s) {
                return Err(Error::Config(format!("start {s:?} lies outside the grid")));
            }
        }
        if let Some(h) = self.hazards.iter().find(|h| !self.inside(**h)) {
            return Err(Error::Config(format!("hazard {h:?} lies outside the grid")));
        }
        if self.hazards.contains(&self.goal) {
            return Err(Error::Config("goal cell cannot also be a hazard".into()));
        }
        Ok(())
    }

    fn inside(&self, c: [usize; 2]) -> bool {
        c[0] < self.width && c[1] < self.height
    }

    pub fn n_states(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn cell(&self, index: usize) -> [usize; 2] {
        [index % self.width, index / self.width]
    }

    pub fn is_terminal_cell(&self, c: [usize; 2]) -> bool {
        c == self.goal || self.hazards.contains(&c)
    }

    fn windy(&self, row: usize) -> bool {
        match &self.windy_rows {
            None => true,
            Some(rows) => rows.contains(&row),
        }
    }

    fn clamp_move(&self, c: [usize; 2], dx: i64, dy: i64) -> [usize; 2] {
        let x = (c[0] as i64 + dx).clamp(0, self.width as i64 - 1);
        let y = (c[1] as i64 + dy).clamp(0, self.height as i64 - 1);
        [x as usize, y as usize]
    }

    /// Shared reward function; depends only on the destination cell.
    pub fn reward(&self, next: [usize; 2]) -> f64 {
        let mut r = self.step_penalty;
        if next == self.goal {
            r += self.goal_reward;
        }
        if self.hazards.contains(&next) {
            r += self.hazard_reward;
        }
        r
    }

    /// Exact successor distribution for an executed (already shifted) move.
    /// Terminal cells are absorbing.
    pub fn successors(&self, c: [usize; 2], executed: [i64; 2], wind_prob: f64) -> Vec<([usize; 2], f64)> {
        if self.is_terminal_cell(c) {
            return vec![(c, 1.0)];
        }
        let moved = self.clamp_move(c, executed[0], executed[1]);
        if wind_prob > 0.0 && self.windy(moved[1]) {
            let pushed = self.clamp_move(moved, self.wind_direction, 0);
            if pushed == moved {
                vec![(moved, 1.0)]
            } else {
                vec![(pushed, wind_prob), (moved, 1.0 - wind_prob)]
            }
        } else {
            vec![(moved, 1.0)]
        }
    }

    pub fn sample_successor<R: Rng + ?Sized>(
        &self,
        c: [usize; 2],
        executed: [i64; 2],
        wind_prob: f64,
        rng: &mut R,
    ) -> [usize; 2] {
        if self.is_terminal_cell(c) {
            return c;
        }
        let moved = self.clamp_move(c, executed[0], executed[1]);
        // Always consume one draw per step for stream alignment across domains.
        let u: f64 = rng.random();
        if self.windy(moved[1]) && u < wind_prob {
            self.clamp_move(moved, self.wind_direction, 0)
        } else {
            moved
        }
    }
}

mod start_cell {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Cell([usize; 2]),
        Name(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<[usize; 2]>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(c) => Repr::Cell(*c).serialize(s),
            None => Repr::Name("uniform".into()).serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<[usize; 2]>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Cell(c) => Ok(Some(c)),
            Repr::Name(n) if n == "uniform" => Ok(None),
            Repr::Name(n) => Err(serde::de::Error::custom(format!(
                "start must be [x, y] or \"uniform\", got {n:?}"
            ))),
        }
    }
}

/// Grid cell of a grid state vector.
pub fn cell_of(state: &[f64]) -> [usize; 2] {
    [state[0].round() as usize, state[1].round() as usize]
}

pub fn state_of(c: [usize; 2]) -> Vec<f64> {
    vec![c[0] as f64, c[1] as f64]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compass_moves_match_names() {
        let m = MoveSet::Compass;
        assert_eq!(m.moves().len(), m.names().len());
        assert_eq!(m.moves()[4], [1, 0]);
        assert_eq!(MoveSet::King.moves().len(), 9);
        assert_eq!(MoveSet::King.moves()[3], [1, 1]);
    }

    #[test]
    fn wind_pushes_laterally_and_clamps() {
        let spec = GridSpec {
            wind_prob: 0.3,
            ..GridSpec::default()
        };
        let succ = spec.successors([2, 2], [0, 1], 0.3);
        assert_eq!(succ, vec![([3, 3], 0.3), ([2, 3], 0.7)]);
        // pushed into the wall: no displacement
        let succ = spec.successors([4, 2], [0, 1], 0.3);
        assert_eq!(succ, vec![([4, 3], 1.0)]);
    }

    #[test]
    fn terminal_cells_absorb() {
        let spec = GridSpec {
            hazards: vec![[1, 1]],
            ..GridSpec::default()
        };
        assert_eq!(spec.successors([1, 1], [1, 0], 0.0), vec![([1, 1], 1.0)]);
        assert_eq!(spec.successors([4, 4], [-1, 0], 0.0), vec![([4, 4], 1.0)]);
        assert_eq!(spec.reward([1, 1]), -11.0);
        assert_eq!(spec.reward([4, 4]), 9.0);
    }

    #[test]
    fn validation() {
        assert!(GridSpec::default().validate().is_ok());
        let bad = GridSpec {
            goal: [5, 0],
            ..GridSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = GridSpec {
            wind_prob: -0.1,
            ..GridSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = GridSpec {
            horizon: 0,
            ..GridSpec::default()
        };
        assert!(bad.validate().is_err());
    }
}
