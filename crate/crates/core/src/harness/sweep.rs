//! Ablation sweeps over mask scale, speed and count.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{run, RunConfig, RunMetrics};
use crate::action::ActionSpaceSpec;
use crate::geometry::MaskSpec;

/// Axis values to sweep. An empty axis keeps the base configuration's value;
/// cells are the cartesian product of the non-empty axes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub scales: Vec<u32>,
    pub speeds: Vec<u32>,
    pub masks: Vec<u32>,
}

impl SweepGrid {
    /// Mask scale ablation, speed 50, one mask.
    pub fn scale_preset() -> Self {
        Self {
            scales: vec![70, 100, 130],
            ..Self::default()
        }
    }

    /// Mask speed ablation, scale 100, one mask.
    pub fn speed_preset() -> Self {
        Self {
            speeds: vec![10, 30, 50],
            ..Self::default()
        }
    }

    /// Mask count ablation, scale 100, speed 50.
    pub fn masks_preset() -> Self {
        Self {
            masks: vec![1, 2],
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "scale" => Some(Self::scale_preset()),
            "speed" => Some(Self::speed_preset()),
            "masks" => Some(Self::masks_preset()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty() && self.speeds.is_empty() && self.masks.is_empty()
    }

    pub fn cells(&self) -> Vec<SweepCell> {
        if self.is_empty() {
            return Vec::new();
        }
        fn axis(v: &[u32]) -> Vec<Option<u32>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().copied().map(Some).collect()
            }
        }
        let mut cells = Vec::new();
        for scale in axis(&self.scales) {
            for speed in axis(&self.speeds) {
                for masks in axis(&self.masks) {
                    cells.push(SweepCell {
                        scale,
                        speed,
                        masks,
                    });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepCell {
    pub scale: Option<u32>,
    pub speed: Option<u32>,
    pub masks: Option<u32>,
}

impl SweepCell {
    /// The base configuration with this cell's overrides applied. Every mask
    /// is a copy of the base's first mask.
    pub fn apply(&self, base: &RunConfig) -> RunConfig {
        let mut cfg = base.clone();
        let mut template = base.env.masks.first().copied().unwrap_or_default();
        if let Some(s) = self.scale {
            template.scale_h = s;
            template.scale_w = s;
        }
        if let Some(v) = self.speed {
            template.speed = v;
        }
        let n = self.masks.unwrap_or(base.env.masks.len().max(1) as u32) as usize;
        cfg.env.masks = vec![template; n];
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub cell: SweepCell,
    pub mask: MaskSpec,
    pub n_masks: u32,
    pub total_actions: u64,
    pub result: Result<RunMetrics, String>,
}

/// One run per grid cell. Failing cells are reported in their row and do not
/// stop the sweep.
pub fn sweep(base: &RunConfig, grid: &SweepGrid) -> Vec<SweepRow> {
    grid.cells()
        .into_iter()
        .enumerate()
        .map(|(i, cell)| {
            let mut cfg = cell.apply(base);
            if let Some(out) = &base.out {
                cfg.out = Some(out.join(format!("cell_{i:03}")));
            }
            let n_game = cfg.game.make().n_game_actions();
            let n_masks = cfg.env.masks.len() as u32;
            let total_actions = ActionSpaceSpec::new(n_game, n_masks)
                .total_actions()
                .unwrap_or(0);
            SweepRow {
                cell,
                mask: cfg.env.masks[0],
                n_masks,
                total_actions,
                result: run(&cfg).map_err(|e| e.to_string()),
            }
        })
        .collect()
}

/// Plain-text table with one row per cell.
pub fn render_table(game: &str, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "| game | scale | speed | masks | actions | episodes | mean_last_100 |"
    );
    let _ = writeln!(out, "|---|---|---|---|---|---|---|");
    for row in rows {
        let (episodes, score) = match &row.result {
            Ok(m) => (
                m.returns.len().to_string(),
                format!("{:.1}", m.mean_last_100),
            ),
            Err(e) => ("-".to_string(), format!("error: {e}")),
        };
        let _ = writeln!(
            out,
            "| {game} | {} | {} | {} | {} | {episodes} | {score} |",
            row.mask.scale_h, row.mask.speed, row.n_masks, row.total_actions
        );
    }
    out
}
