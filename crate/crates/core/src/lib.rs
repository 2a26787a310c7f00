pub mod action;
pub mod aig;
pub mod env;
pub mod error;
pub mod games;
pub mod geometry;
pub mod harness;
pub mod observation;
pub mod rng;
pub mod session;

pub const DEFAULT_MASK_SCALE: u32 = 100;
pub const DEFAULT_MASK_SPEED: u32 = 50;
