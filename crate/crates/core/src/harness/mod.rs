//! Seeded, parallel episode execution and the metrics reported for a run.

mod config;
mod sweep;
mod trajectory;

use std::fs;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{PolicyKind, RunConfig};
pub use sweep::{render_table, sweep, SweepCell, SweepGrid, SweepRow};
pub use trajectory::{
    replay, Header, Record, ReplayReport, StepRecord, Trajectory, TrajectoryWriter,
    TRAJECTORY_VERSION,
};

use crate::action::ActionSpaceSpec;
use crate::env::MaskedEnv;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, SimRng, Stream};

/// Mean of the final `min(100, n)` returns; `None` for no episodes.
pub fn mean_last_100(returns: &[f64]) -> Option<f64> {
    if returns.is_empty() {
        return None;
    }
    let tail = &returns[returns.len().saturating_sub(100)..];
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Per-episode return including auxiliary rewards.
    pub returns: Vec<f64>,
    /// Per-episode game score.
    pub raw_returns: Vec<i64>,
    /// Agent steps per episode.
    pub lengths: Vec<u64>,
    pub mean_last_100: f64,
    /// Mean of the last 100 game scores.
    pub raw_mean_last_100: f64,
    pub total_actions: u64,
    pub wall_clock_secs: f64,
}

impl RunMetrics {
    /// Equality on everything except wall-clock time.
    pub fn same_results(&self, other: &RunMetrics) -> bool {
        self.returns
            .iter()
            .map(|x| x.to_bits())
            .eq(other.returns.iter().map(|x| x.to_bits()))
            && self.raw_returns == other.raw_returns
            && self.lengths == other.lengths
            && self.total_actions == other.total_actions
    }
}

/// Chooses joint action indices for one episode.
pub struct Policy {
    kind: PolicyKind,
    total: u64,
    rng: SimRng,
    t: usize,
}

impl Policy {
    pub fn new(kind: PolicyKind, space: ActionSpaceSpec, seed: u64) -> Result<Self> {
        let total = space.total_actions()?;
        if let PolicyKind::Cycle(seq) = &kind {
            if let Some(&bad) = seq.iter().find(|&&a| a >= total) {
                return Err(Error::IndexOutOfRange { index: bad, total });
            }
        }
        Ok(Self {
            kind,
            total,
            rng: rng_from_seed(seed),
            t: 0,
        })
    }

    pub fn next_action(&mut self) -> Result<u64> {
        let a = match &self.kind {
            PolicyKind::Random => self.rng.random_range(0..self.total),
            PolicyKind::Noop => 0,
            PolicyKind::Cycle(seq) => seq[self.t % seq.len()],
            PolicyKind::External => {
                return Err(Error::ConfigInvalid(
                    "external policy has no offline actions".into(),
                ))
            }
        };
        self.t += 1;
        Ok(a)
    }
}

/// Result of one episode.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub index: u64,
    pub ret: f64,
    pub raw_return: i64,
    pub length: u64,
    pub trajectory: Option<Trajectory>,
}

/// Runs episode `index` of `cfg` in its own environment instance. The
/// instance is seeded from `(cfg.env.seed, index)` only, so outcomes do not
/// depend on which worker runs it.
pub fn run_episode(cfg: &RunConfig, index: u64) -> Result<EpisodeOutcome> {
    let mut env = MaskedEnv::new(cfg.env.clone(), cfg.game.make())?;
    let space = env.action_space();
    let (_, reset) = env.reset_episode(index)?;
    let mut policy = Policy::new(
        cfg.policy.clone(),
        space,
        derive_seed(reset.episode_seed, Stream::Policy as u64),
    )?;
    let mut trajectory = cfg
        .log_trajectories
        .then(|| Trajectory::new(Header::new(cfg.game, &cfg.env, &reset)));
    let mut ret = 0.0;
    let mut raw_return = 0;
    let mut t = 0u64;
    loop {
        if cfg.max_steps > 0 && t >= cfg.max_steps {
            break;
        }
        let action = policy.next_action()?;
        let r = env.step_index(action)?;
        ret += r.reward;
        raw_return += r.info.raw;
        if let Some(traj) = trajectory.as_mut() {
            let executed = space.encode(&r.info.executed)?;
            traj.steps.push(StepRecord::new(t, action, executed, &r));
        }
        t += 1;
        if r.terminal {
            break;
        }
    }
    Ok(EpisodeOutcome {
        index,
        ret,
        raw_return,
        length: t,
        trajectory,
    })
}

/// Executes the episode budget on a pool of `cfg.parallel` workers.
pub fn run_outcomes(cfg: &RunConfig) -> Result<Vec<EpisodeOutcome>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel as usize)
        .build()
        .map_err(|e| Error::ConfigInvalid(format!("worker pool: {e}")))?;
    pool.install(|| {
        (0..cfg.episodes as u64)
            .into_par_iter()
            .map(|i| run_episode(cfg, i))
            .collect()
    })
}

pub fn run(cfg: &RunConfig) -> Result<RunMetrics> {
    let start = Instant::now();
    let outcomes = run_outcomes(cfg)?;
    let n_game = cfg.game.make().n_game_actions();
    let total_actions = ActionSpaceSpec::new(n_game, cfg.env.masks.len() as u32).total_actions()?;
    let returns: Vec<f64> = outcomes.iter().map(|o| o.ret).collect();
    let raw_returns: Vec<i64> = outcomes.iter().map(|o| o.raw_return).collect();
    let raw_f: Vec<f64> = raw_returns.iter().map(|&r| r as f64).collect();
    let metrics = RunMetrics {
        mean_last_100: mean_last_100(&returns).unwrap_or(0.0),
        raw_mean_last_100: mean_last_100(&raw_f).unwrap_or(0.0),
        lengths: outcomes.iter().map(|o| o.length).collect(),
        returns,
        raw_returns,
        total_actions,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    if let Some(out) = &cfg.out {
        persist(out, cfg, &metrics, &outcomes)?;
    }
    Ok(metrics)
}

fn persist(
    out: &Path,
    cfg: &RunConfig,
    metrics: &RunMetrics,
    outcomes: &[EpisodeOutcome],
) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let config_path = out.join("config.toml");
    fs::write(&config_path, cfg.to_toml()?).map_err(|e| Error::io(&config_path, e))?;
    let metrics_path = out.join("metrics.json");
    let json = serde_json::to_string_pretty(metrics)?;
    fs::write(&metrics_path, json).map_err(|e| Error::io(&metrics_path, e))?;

    if outcomes.iter().any(|o| o.trajectory.is_some()) {
        let dir = out.join("trajectories");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for o in outcomes {
            if let Some(traj) = &o.trajectory {
                let path = dir.join(format!("episode_{:05}.jsonl", o.index));
                let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                traj.write_jsonl(BufWriter::new(file))?;
            }
        }
    }
    Ok(())
}
