//! Joint game x mask action space.
//!
//! Indices are mixed-radix with the game action as the most significant
//! digit, followed by one base-9 digit per mask in mask order.

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::geometry::Direction;

pub type MaskDirs = SmallVec<[Direction; 2]>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction {
    pub game: u32,
    pub mask_dirs: MaskDirs,
}

impl JointAction {
    pub fn new(game: u32, mask_dirs: impl IntoIterator<Item = Direction>) -> Self {
        Self {
            game,
            mask_dirs: mask_dirs.into_iter().collect(),
        }
    }

    /// The given game action with every mask holding still.
    pub fn holding(game: u32, n_masks: usize) -> Self {
        Self {
            game,
            mask_dirs: SmallVec::from_elem(Direction::Stay, n_masks),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionSpaceSpec {
    pub n_game: u32,
    pub n_masks: u32,
}

impl ActionSpaceSpec {
    pub fn new(n_game: u32, n_masks: u32) -> Self {
        Self { n_game, n_masks }
    }

    /// `n_game * 9^n_masks`.
    pub fn total_actions(&self) -> Result<u64> {
        let overflow = Error::ActionSpaceOverflow {
            n_game: self.n_game,
            n_masks: self.n_masks,
        };
        if self.n_game == 0 {
            return Err(Error::InvalidAction("need at least one game action".into()));
        }
        (Direction::COUNT as u64)
            .checked_pow(self.n_masks)
            .and_then(|m| m.checked_mul(self.n_game as u64))
            .ok_or(overflow)
    }

    pub fn validate(&self, action: &JointAction) -> Result<()> {
        if action.game >= self.n_game {
            return Err(Error::InvalidAction(format!(
                "game action {} outside [0, {})",
                action.game, self.n_game
            )));
        }
        if action.mask_dirs.len() != self.n_masks as usize {
            return Err(Error::InvalidAction(format!(
                "expected {} mask directions, got {}",
                self.n_masks,
                action.mask_dirs.len()
            )));
        }
        Ok(())
    }

    pub fn encode(&self, action: &JointAction) -> Result<u64> {
        self.validate(action)?;
        self.total_actions()?;
        Ok(action.mask_dirs.iter().fold(action.game as u64, |acc, d| {
            acc * Direction::COUNT as u64 + d.index() as u64
        }))
    }

    pub fn decode(&self, index: u64) -> Result<JointAction> {
        let total = self.total_actions()?;
        if index >= total {
            return Err(Error::IndexOutOfRange { index, total });
        }
        let base = Direction::COUNT as u64;
        let mut rest = index;
        let mut dirs = MaskDirs::from_elem(Direction::Stay, self.n_masks as usize);
        for slot in dirs.iter_mut().rev() {
            *slot = Direction::ALL[(rest % base) as usize];
            rest /= base;
        }
        Ok(JointAction {
            game: rest as u32,
            mask_dirs: dirs,
        })
    }
}

/// Sticky execution: with probability `prob` the previously executed action
/// is repeated instead of the requested one. The whole joint action repeats
/// as a unit. Returns the executed action and whether it was a repeat.
///
/// No draw is consumed on the first step of an episode (`previous == None`).
pub fn apply_sticky<R: Rng + ?Sized>(
    current: &JointAction,
    previous: Option<&JointAction>,
    prob: f64,
    rng: &mut R,
) -> (JointAction, bool) {
    match previous {
        None => (current.clone(), false),
        Some(prev) => {
            let draw: f64 = rng.random();
            if draw < prob {
                (prev.clone(), true)
            } else {
                (current.clone(), false)
            }
        }
    }
}
