//! Line-delimited JSON trajectory logs and their replay.
//!
//! A log holds one header record followed by one record per environment
//! step. Every record carries the schema version in `v`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, MaskedEnv, ResetInfo, StepResult};
use crate::error::{Error, Result};
use crate::games::GameKind;
use crate::geometry::MaskState;
use crate::rng::SEED_SCHEME_VERSION;

pub const TRAJECTORY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub v: u32,
    pub game: GameKind,
    pub episode: u64,
    pub seed_scheme: u32,
    pub noops: u32,
    pub masks: Vec<[u32; 2]>,
    pub env: EnvConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub v: u32,
    pub t: u64,
    /// Requested joint action index.
    pub action: u64,
    /// Joint action index after sticky execution.
    pub executed: u64,
    pub raw: i64,
    pub aux: f64,
    pub reward: f64,
    pub masks: Vec<[u32; 2]>,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Header(Header),
    Step(StepRecord),
}

pub(crate) fn centers(states: &[MaskState]) -> Vec<[u32; 2]> {
    states
        .iter()
        .map(|s| [s.center_row, s.center_col])
        .collect()
}

impl Header {
    pub fn new(game: GameKind, env: &EnvConfig, reset: &ResetInfo) -> Self {
        Self {
            v: TRAJECTORY_VERSION,
            game,
            episode: reset.episode,
            seed_scheme: SEED_SCHEME_VERSION,
            noops: reset.noops,
            masks: centers(&reset.mask_states),
            env: env.clone(),
        }
    }
}

impl StepRecord {
    pub fn new(t: u64, action: u64, executed: u64, result: &StepResult) -> Self {
        Self {
            v: TRAJECTORY_VERSION,
            t,
            action,
            executed,
            raw: result.info.raw,
            aux: result.info.aux,
            reward: result.reward,
            masks: centers(&result.info.mask_states),
            terminal: result.terminal,
        }
    }
}

/// One episode's records, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub header: Header,
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn new(header: Header) -> Self {
        Self {
            header,
            steps: Vec::new(),
        }
    }

    pub fn total_raw(&self) -> i64 {
        self.steps.iter().map(|s| s.raw).sum()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn records(&self) -> impl Iterator<Item = Record> + '_ {
        std::iter::once(Record::Header(self.header.clone()))
            .chain(self.steps.iter().cloned().map(Record::Step))
    }

    pub fn write_jsonl<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = TrajectoryWriter::new(out);
        writer.header(&self.header)?;
        for s in &self.steps {
            writer.step(s)?;
        }
        writer.flush()
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Malformed("empty trajectory log".into()))??;
        let header = match serde_json::from_str::<Record>(&first)? {
            Record::Header(h) => h,
            Record::Step(_) => return Err(Error::Malformed("log must start with a header".into())),
        };
        if header.v != TRAJECTORY_VERSION {
            return Err(Error::Malformed(format!(
                "unsupported log version {}",
                header.v
            )));
        }
        let mut traj = Trajectory::new(header);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Record>(&line)? {
                Record::Step(s) => traj.steps.push(s),
                Record::Header(_) => return Err(Error::Malformed("second header in log".into())),
            }
        }
        Ok(traj)
    }
}

/// Append-only writer, one JSON object per line.
pub struct TrajectoryWriter<W: Write> {
    out: W,
    records: u64,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out, records: 0 }
    }

    fn write(&mut self, record: &Record) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.records += 1;
        Ok(())
    }

    pub fn header(&mut self, header: &Header) -> Result<()> {
        self.write(&Record::Header(header.clone()))
    }

    pub fn step(&mut self, step: &StepRecord) -> Result<()> {
        self.write(&Record::Step(step.clone()))
    }

    pub fn records_written(&self) -> u64 {
        self.records
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub steps: u64,
    pub total_raw: i64,
    pub total_reward: f64,
    pub terminal: bool,
}

/// Re-executes a trajectory's requested actions in a fresh environment and
/// checks every logged quantity bit for bit.
pub fn replay(traj: &Trajectory) -> Result<ReplayReport> {
    let h = &traj.header;
    if h.seed_scheme != SEED_SCHEME_VERSION {
        return Err(Error::Malformed(format!(
            "log uses seed scheme {}, this build uses {}",
            h.seed_scheme, SEED_SCHEME_VERSION
        )));
    }
    let mut env = MaskedEnv::new(h.env.clone(), h.game.make())?;
    let (_, reset) = env.reset_episode(h.episode)?;
    let mismatch = |step: u64, detail: String| Err(Error::ReplayMismatch { step, detail });
    if reset.noops != h.noops || centers(&reset.mask_states) != h.masks {
        return mismatch(0, "reset state differs".into());
    }
    let space = env.action_space();
    let mut report = ReplayReport {
        steps: 0,
        total_raw: 0,
        total_reward: 0.0,
        terminal: false,
    };
    for rec in &traj.steps {
        let r = env.step_index(rec.action)?;
        let executed = space.encode(&r.info.executed)?;
        let got = StepRecord::new(rec.t, rec.action, executed, &r);
        if got.executed != rec.executed
            || got.raw != rec.raw
            || got.aux.to_bits() != rec.aux.to_bits()
            || got.reward.to_bits() != rec.reward.to_bits()
            || got.masks != rec.masks
            || got.terminal != rec.terminal
        {
            return mismatch(rec.t, format!("logged {rec:?}, replayed {got:?}"));
        }
        report.steps += 1;
        report.total_raw += r.info.raw;
        report.total_reward += r.reward;
        report.terminal = r.terminal;
    }
    Ok(report)
}
