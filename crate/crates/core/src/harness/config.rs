use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::games::GameKind;

/// How actions are chosen during a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PolicyKind {
    /// Uniform over the joint action space.
    Random,
    /// Always action index 0: game noop, every mask holding still.
    Noop,
    /// Cycles through a fixed list of joint action indices.
    Cycle(Vec<u64>),
    /// Actions arrive from outside (a session client); not runnable offline.
    External,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Random => f.write_str("random"),
            PolicyKind::Noop => f.write_str("noop"),
            PolicyKind::External => f.write_str("external"),
            PolicyKind::Cycle(seq) => {
                f.write_str("cycle:")?;
                for (i, a) in seq.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(PolicyKind::Random),
            "noop" => Ok(PolicyKind::Noop),
            "external" => Ok(PolicyKind::External),
            "scripted" => Ok(PolicyKind::Cycle(vec![0])),
            other => {
                let list = other
                    .strip_prefix("cycle:")
                    .ok_or_else(|| Error::ConfigInvalid(format!("unknown policy `{other}`")))?;
                let seq = list
                    .split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<u64>()
                            .map_err(|_| Error::ConfigInvalid(format!("bad action index `{x}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if seq.is_empty() {
                    return Err(Error::ConfigInvalid("empty cycle policy".into()));
                }
                Ok(PolicyKind::Cycle(seq))
            }
        }
    }
}

impl TryFrom<String> for PolicyKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PolicyKind> for String {
    fn from(p: PolicyKind) -> String {
        p.to_string()
    }
}

/// A complete, reproducible description of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub game: GameKind,
    pub policy: PolicyKind,
    pub episodes: u32,
    pub parallel: u32,
    /// Optional cap on agent steps per episode; 0 means none.
    pub max_steps: u64,
    pub out: Option<PathBuf>,
    pub log_trajectories: bool,
    pub env: EnvConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            game: GameKind::SpriteChase,
            policy: PolicyKind::Random,
            episodes: 1,
            parallel: 64,
            max_steps: 0,
            out: None,
            log_trajectories: false,
            env: EnvConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::ConfigInvalid("episodes must be at least 1".into()));
        }
        if self.parallel == 0 {
            return Err(Error::ConfigInvalid("parallel must be at least 1".into()));
        }
        if self.policy == PolicyKind::External {
            return Err(Error::ConfigInvalid(
                "external policies are driven through `serve`, not `run`".into(),
            ));
        }
        self.env.validate(self.game.make().window())
    }
}
