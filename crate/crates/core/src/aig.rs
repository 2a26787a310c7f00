//! Active-information-gathering auxiliary rewards.
//!
//! Both rewards look at a five-step window `t-3 ..= t+1`. Until five entries
//! are available the reward is zero.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::geometry::VisibilityMap;
use crate::observation::GrayFrame;

pub const AIG_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AuxReward {
    #[default]
    None,
    /// Penalizes overlap of the newest observation with the previous four.
    Novelty,
    /// Rewards pixels newly brought under a mask.
    Coverage,
}

/// Flattened frame scaled to unit L2 norm; all-black frames become zero.
pub fn normalized(frame: &GrayFrame) -> Vec<f64> {
    let norm_sq: u64 = frame.pixels().iter().map(|&p| p as u64 * p as u64).sum();
    if norm_sq == 0 {
        return vec![0.0; frame.pixels().len()];
    }
    let norm = (norm_sq as f64).sqrt();
    frame.pixels().iter().map(|&p| p as f64 / norm).collect()
}

#[derive(Debug, Clone, Default)]
pub struct ObservationHistory {
    vectors: VecDeque<Vec<f64>>,
}

impl ObservationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.vectors.clear();
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn push(&mut self, frame: &GrayFrame) {
        self.push_vector(normalized(frame));
    }

    pub fn push_vector(&mut self, v: Vec<f64>) {
        if self.vectors.len() == AIG_WINDOW {
            self.vectors.pop_front();
        }
        self.vectors.push_back(v);
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.iter().map(Vec::as_slice)
    }

    /// `-0.25 * (v[t-3] + v[t-2] + v[t-1] + v[t]) . v[t+1]`
    pub fn novelty_reward(&self) -> f64 {
        if self.vectors.len() < AIG_WINDOW {
            return 0.0;
        }
        let [a, b, c, d, newest] = [0, 1, 2, 3, 4].map(|i| self.vectors[i].as_slice());
        let dot: f64 = (0..newest.len())
            .map(|i| (a[i] + b[i] + c[i] + d[i]) * newest[i])
            .sum();
        -0.25 * dot
    }
}

/// Recent per-step visibility maps at native resolution.
#[derive(Debug, Clone, Default)]
pub struct CoverageMerge {
    maps: VecDeque<VisibilityMap>,
}

impl CoverageMerge {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.maps.clear();
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn push(&mut self, map: VisibilityMap) {
        if self.maps.len() == AIG_WINDOW {
            self.maps.pop_front();
        }
        self.maps.push_back(map);
    }

    /// Merged coverage over the stored maps `[first, last)`.
    pub fn merged(&self, first: usize, last: usize) -> VisibilityMap {
        let mut iter = self.maps.range(first..last);
        let mut acc = iter.next().expect("non-empty merge range").clone();
        for m in iter {
            acc.union_with(m);
        }
        acc
    }

    /// `|| w[t-3, t+1] - w[t-3, t] ||`
    pub fn coverage_reward(&self) -> f64 {
        if self.maps.len() < AIG_WINDOW {
            return 0.0;
        }
        let before = self.merged(0, AIG_WINDOW - 1);
        let after = self.merged(0, AIG_WINDOW);
        let sq: u64 = after
            .bits()
            .iter()
            .zip(before.bits())
            .map(|(&a, &b)| {
                let d = a as i64 - b as i64;
                (d * d) as u64
            })
            .sum();
        (sq as f64).sqrt()
    }
}

/// Per-environment tracker for whichever auxiliary reward is configured.
#[derive(Debug, Clone, Default)]
pub struct AigTracker {
    kind: AuxReward,
    observations: ObservationHistory,
    coverage: CoverageMerge,
}

impl AigTracker {
    pub fn new(kind: AuxReward) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn kind(&self) -> AuxReward {
        self.kind
    }

    pub fn reset(&mut self) {
        self.observations.clear();
        self.coverage.clear();
    }

    /// Records one time step and returns the auxiliary reward for it.
    pub fn observe(&mut self, observed: &GrayFrame, vis: impl FnOnce() -> VisibilityMap) -> f64 {
        match self.kind {
            AuxReward::None => 0.0,
            AuxReward::Novelty => {
                self.observations.push(observed);
                self.observations.novelty_reward()
            }
            AuxReward::Coverage => {
                self.coverage.push(vis());
                self.coverage.coverage_reward()
            }
        }
    }
}
