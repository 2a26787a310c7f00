use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::{MaskSpec, WindowSpec};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window {height}x{width}")]
    InvalidWindow { height: u32, width: u32 },

    #[error("mask {spec:?} does not fit window {window:?}")]
    InvalidMask { spec: MaskSpec, window: WindowSpec },

    #[error("no valid placement for mask {spec:?} in window {window:?}")]
    NoValidPlacement { spec: MaskSpec, window: WindowSpec },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        found: (u32, u32),
    },

    #[error("resolution decay needs exactly one mask, got {0}")]
    DecayWithMultipleMasks(usize),

    #[error("invalid decay settings: {0}")]
    InvalidDecay(String),

    #[error("action index {index} out of range (total {total})")]
    IndexOutOfRange { index: u64, total: u64 },

    #[error("invalid joint action: {0}")]
    InvalidAction(String),

    #[error("action space too large: {n_game} game actions with {n_masks} masks")]
    ActionSpaceOverflow { n_game: u32, n_masks: u32 },

    #[error("environment stepped after a terminal transition")]
    SteppedAfterTerminal,

    #[error("environment stepped before reset")]
    NotReset,

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("unknown game `{0}`")]
    UnknownGame(String),

    #[error("replay diverged at step {step}: {detail}")]
    ReplayMismatch { step: u64, detail: String },

    #[error("malformed record: {0}")]
    Malformed(String),

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    IoStream(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
