//! WebSocket service for live agent and human sessions.
//!
//! Connect to `/ws`; the message protocol lives in `mask_atari::session`.

pub mod server;
pub mod store;

pub use server::{router, serve, spawn, ServerState};
pub use store::{
    baseline, read_dir, read_file, render_baseline, replay_record, BaselineRow, EpisodeStore,
};
