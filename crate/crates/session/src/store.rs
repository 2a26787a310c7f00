//! Append-only episode store: one JSONL file per UTC day.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{NaiveDate, Utc};
use mask_atari::harness::{replay, ReplayReport};
use mask_atari::session::EpisodeRecord;

#[derive(Debug)]
pub struct EpisodeStore {
    dir: PathBuf,
    lock: Mutex<()>,
}

impl EpisodeStore {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, day: NaiveDate) -> PathBuf {
        self.dir
            .join(format!("episodes-{}.jsonl", day.format("%Y-%m-%d")))
    }

    pub fn append(&self, record: &EpisodeRecord) -> io::Result<PathBuf> {
        self.append_on(Utc::now().date_naive(), record)
    }

    /// Appends one line. Lines are written whole under a lock so concurrent
    /// sessions never interleave.
    pub fn append_on(&self, day: NaiveDate, record: &EpisodeRecord) -> io::Result<PathBuf> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let path = self.path_for(day);
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
        f.write_all(&line)?;
        f.flush()?;
        Ok(path)
    }

    pub fn read_day(&self, day: NaiveDate) -> io::Result<Vec<EpisodeRecord>> {
        read_file(&self.path_for(day))
    }
}

pub fn read_file(path: &Path) -> io::Result<Vec<EpisodeRecord>> {
    let f = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Per-(game, player) summary of completed episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub game: String,
    pub player: String,
    pub episodes: usize,
    pub mean_score: f64,
    pub best_score: i64,
}

/// Aggregates completed records into a human-baseline table, sorted by game
/// then player. Incomplete episodes are left out.
pub fn baseline(records: &[EpisodeRecord]) -> Vec<BaselineRow> {
    let mut groups: BTreeMap<(String, String), Vec<i64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.complete) {
        groups
            .entry((r.header.game.to_string(), r.player.clone()))
            .or_default()
            .push(r.final_score);
    }
    groups
        .into_iter()
        .map(|((game, player), scores)| BaselineRow {
            mean_score: scores.iter().sum::<i64>() as f64 / scores.len() as f64,
            best_score: scores.iter().copied().max().unwrap_or(0),
            episodes: scores.len(),
            game,
            player,
        })
        .collect()
}

pub fn render_baseline(rows: &[BaselineRow]) -> String {
    let mut out =
        String::from("| game | player | episodes | mean | best |\n|---|---|---|---|---|\n");
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {:.1} | {} |\n",
            r.game, r.player, r.episodes, r.mean_score, r.best_score
        ));
    }
    out
}

/// All records in every daily file under `dir`, oldest day first.
pub fn read_dir(dir: &Path) -> io::Result<Vec<EpisodeRecord>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("episodes-") && n.ends_with(".jsonl"))
        })
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(read_file(&f)?);
    }
    Ok(out)
}

/// Re-executes a stored episode and checks it against its log.
pub fn replay_record(record: &EpisodeRecord) -> mask_atari::error::Result<ReplayReport> {
    replay(&record.trajectory())
}
