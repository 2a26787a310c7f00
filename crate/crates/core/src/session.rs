//! Live-session protocol, version "1".
//!
//! Control messages are JSON text objects tagged by `kind`. Frames travel as
//! a single binary message:
//!
//! ```text
//! u32 LE  envelope length N
//! N bytes JSON envelope (FrameEnvelope)
//! obs.height * obs.width bytes        agent observation (newest 84x84 frame)
//! native.height * native.width bytes  masked frame at window resolution
//! ```
//!
//! Lifecycle: `hello -> [configure] -> reset -> (act -> frame)* -> terminal
//! -> (reset | bye)`. In human mode the server steps on its own clock and an
//! `act` only updates the action used at the next tick.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::action::JointAction;
use crate::env::{EnvConfig, MaskedEnv};
use crate::error::{Error, Result};
use crate::games::{FrameSource, GameKind};
use crate::geometry::{Direction, Rect};
use crate::harness::{Header, StepRecord, Trajectory};
use crate::observation::GrayFrame;

pub const PROTOCOL_VERSION: &str = "1";
pub const DEFAULT_STEPS_PER_SEC: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlayMode {
    /// Every `act` is answered by exactly one frame.
    #[default]
    Agent,
    /// The server advances at a fixed step rate; missing input is (noop, Stay).
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello {
        version: String,
        #[serde(default)]
        player: Option<String>,
        #[serde(default)]
        mode: Option<PlayMode>,
    },
    Configure {
        #[serde(default)]
        game: Option<GameKind>,
        /// Partial environment configuration merged over the server defaults.
        #[serde(default)]
        env: Option<Value>,
    },
    Reset {},
    Act {
        /// Encoded joint action index.
        #[serde(default)]
        action: Option<u64>,
        #[serde(default)]
        game: Option<u32>,
        #[serde(default)]
        masks: Option<Vec<Direction>>,
    },
    Bye {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        version: String,
        session: String,
        mode: PlayMode,
    },
    Configure {
        game: GameKind,
        env: EnvConfig,
        n_game: u32,
        n_masks: u32,
        total_actions: u64,
    },
    Reset {
        episode: u64,
        noops: u32,
    },
    Score {
        step: u64,
        raw: i64,
        aux: f64,
        reward: f64,
        score: i64,
        total_reward: f64,
        /// A `terminal` message follows when set.
        terminal: bool,
    },
    Terminal {
        step: u64,
        score: i64,
        total_reward: f64,
    },
    Bye {},
    Error {
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub height: u32,
    pub width: u32,
}

/// Structured part of a frame message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEnvelope {
    pub kind: String,
    pub episode: u64,
    pub step: u64,
    pub score: i64,
    pub obs: Dims,
    pub native: Dims,
    /// Window-clipped rectangle pieces of each mask, in mask order.
    pub rects: Vec<Vec<Rect>>,
    pub masks: Vec<[u32; 2]>,
    pub decay: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FramePayload {
    pub envelope: FrameEnvelope,
    pub obs: GrayFrame,
    pub native: GrayFrame,
}

pub fn encode_frame(
    envelope: &FrameEnvelope,
    obs: &GrayFrame,
    native: &GrayFrame,
) -> Result<Vec<u8>> {
    if (envelope.obs.height, envelope.obs.width) != (obs.height(), obs.width())
        || (envelope.native.height, envelope.native.width) != (native.height(), native.width())
    {
        return Err(Error::DimensionMismatch {
            expected: (envelope.obs.height, envelope.obs.width),
            found: (obs.height(), obs.width()),
        });
    }
    let head = serde_json::to_vec(envelope)?;
    let mut out = Vec::with_capacity(4 + head.len() + obs.pixels().len() + native.pixels().len());
    out.extend_from_slice(&(head.len() as u32).to_le_bytes());
    out.extend_from_slice(&head);
    out.extend_from_slice(obs.pixels());
    out.extend_from_slice(native.pixels());
    Ok(out)
}

pub fn decode_frame(bytes: &[u8]) -> Result<FramePayload> {
    let short = || Error::Malformed("truncated frame message".into());
    let len_bytes: [u8; 4] = bytes
        .get(..4)
        .ok_or_else(short)?
        .try_into()
        .expect("4 bytes");
    let n = u32::from_le_bytes(len_bytes) as usize;
    let head = bytes.get(4..4 + n).ok_or_else(short)?;
    let envelope: FrameEnvelope = serde_json::from_slice(head)?;
    let obs_len = envelope.obs.height as usize * envelope.obs.width as usize;
    let native_len = envelope.native.height as usize * envelope.native.width as usize;
    let body = &bytes[4 + n..];
    if body.len() != obs_len + native_len {
        return Err(Error::Malformed(format!(
            "frame body has {} bytes, expected {}",
            body.len(),
            obs_len + native_len
        )));
    }
    let obs = GrayFrame::from_pixels(
        envelope.obs.height,
        envelope.obs.width,
        body[..obs_len].to_vec(),
    )?;
    let native = GrayFrame::from_pixels(
        envelope.native.height,
        envelope.native.width,
        body[obs_len..].to_vec(),
    )?;
    Ok(FramePayload {
        envelope,
        obs,
        native,
    })
}

/// One played episode as persisted in the episode store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub v: u32,
    pub session: String,
    pub player: String,
    /// False when the connection ended before a terminal transition.
    pub complete: bool,
    pub final_score: i64,
    pub total_reward: f64,
    pub steps: u64,
    pub header: Header,
    pub trajectory: Vec<StepRecord>,
}

impl EpisodeRecord {
    pub fn trajectory(&self) -> Trajectory {
        Trajectory {
            header: self.header.clone(),
            steps: self.trajectory.clone(),
        }
    }
}

/// Something the transport must do on behalf of a session.
#[derive(Debug, Clone, PartialEq)]
pub enum Outgoing {
    Text(ServerMessage),
    Binary(Vec<u8>),
    /// Persist this record; never sent to the client.
    Record(EpisodeRecord),
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitHello,
    Ready,
    Running,
    Terminal,
    Closed,
}

/// Shared, immutable defaults for new sessions.
#[derive(Debug, Clone)]
pub struct SessionDefaults {
    pub game: GameKind,
    pub env: EnvConfig,
    pub mode: PlayMode,
    pub steps_per_sec: f64,
}

impl Default for SessionDefaults {
    fn default() -> Self {
        Self {
            game: GameKind::SpriteChase,
            env: EnvConfig::default(),
            mode: PlayMode::Agent,
            steps_per_sec: DEFAULT_STEPS_PER_SEC,
        }
    }
}

struct Episode {
    env: MaskedEnv<Box<dyn FrameSource>>,
    trajectory: Trajectory,
    score: i64,
    total_reward: f64,
}

/// Transport-independent session state machine.
pub struct Session {
    id: String,
    defaults: SessionDefaults,
    mode: PlayMode,
    player: String,
    game: GameKind,
    env_cfg: EnvConfig,
    phase: Phase,
    next_episode: u64,
    episode: Option<Episode>,
    pending: Option<JointAction>,
}

impl Session {
    pub fn new(id: impl Into<String>, defaults: SessionDefaults) -> Self {
        Self {
            id: id.into(),
            mode: defaults.mode,
            player: "anonymous".into(),
            game: defaults.game,
            env_cfg: defaults.env.clone(),
            defaults,
            phase: Phase::AwaitHello,
            next_episode: 0,
            episode: None,
            pending: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mode(&self) -> PlayMode {
        self.mode
    }

    pub fn is_closed(&self) -> bool {
        self.phase == Phase::Closed
    }

    /// True while the server clock should be stepping this session.
    pub fn is_paced(&self) -> bool {
        self.mode == PlayMode::Human && self.phase == Phase::Running
    }

    pub fn steps_per_sec(&self) -> f64 {
        self.defaults.steps_per_sec
    }

    fn fail(&mut self, message: impl Into<String>) -> Vec<Outgoing> {
        let mut out = vec![Outgoing::Text(ServerMessage::Error {
            message: message.into(),
        })];
        out.extend(self.close(false));
        out
    }

    fn close(&mut self, send_bye: bool) -> Vec<Outgoing> {
        let mut out = Vec::new();
        if let Some(rec) = self.take_record(false) {
            out.push(Outgoing::Record(rec));
        }
        if send_bye {
            out.push(Outgoing::Text(ServerMessage::Bye {}));
        }
        out.push(Outgoing::Close);
        self.phase = Phase::Closed;
        out
    }

    /// Called by the transport when the connection drops.
    pub fn disconnect(&mut self) -> Vec<Outgoing> {
        if self.phase == Phase::Closed {
            return Vec::new();
        }
        let out = self
            .take_record(false)
            .map(Outgoing::Record)
            .into_iter()
            .collect();
        self.phase = Phase::Closed;
        out
    }

    fn take_record(&mut self, complete: bool) -> Option<EpisodeRecord> {
        if self.mode != PlayMode::Human {
            self.episode = None;
            return None;
        }
        let ep = self.episode.take()?;
        Some(EpisodeRecord {
            v: 1,
            session: self.id.clone(),
            player: self.player.clone(),
            complete,
            final_score: ep.score,
            total_reward: ep.total_reward,
            steps: ep.trajectory.steps.len() as u64,
            header: ep.trajectory.header,
            trajectory: ep.trajectory.steps,
        })
    }

    pub fn handle_text(&mut self, text: &str) -> Vec<Outgoing> {
        match serde_json::from_str::<ClientMessage>(text) {
            Ok(msg) => self.handle(msg),
            Err(e) => self.fail(format!("malformed message: {e}")),
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Vec<Outgoing> {
        if self.phase == Phase::Closed {
            return Vec::new();
        }
        match msg {
            ClientMessage::Hello {
                version,
                player,
                mode,
            } => {
                if self.phase != Phase::AwaitHello {
                    return self.fail("duplicate hello");
                }
                if version != PROTOCOL_VERSION {
                    return self.fail(format!(
                        "protocol version mismatch: server speaks {PROTOCOL_VERSION}, client sent {version}"
                    ));
                }
                if let Some(p) = player {
                    self.player = p;
                }
                if let Some(m) = mode {
                    self.mode = m;
                }
                self.phase = Phase::Ready;
                vec![Outgoing::Text(ServerMessage::Hello {
                    version: PROTOCOL_VERSION.into(),
                    session: self.id.clone(),
                    mode: self.mode,
                })]
            }
            ClientMessage::Configure { game, env } => match self.phase {
                Phase::AwaitHello => self.fail("configure before hello"),
                Phase::Running | Phase::Terminal => self.fail("configure after reset"),
                _ => match self.configure(game, env) {
                    Ok(out) => out,
                    Err(e) => self.fail(format!("invalid configuration: {e}")),
                },
            },
            ClientMessage::Reset {} => match self.phase {
                Phase::AwaitHello => self.fail("reset before hello"),
                Phase::Running if self.mode == PlayMode::Agent => {
                    self.fail("reset during a running episode")
                }
                _ => match self.reset() {
                    Ok(out) => out,
                    Err(e) => self.fail(format!("reset failed: {e}")),
                },
            },
            ClientMessage::Act {
                action,
                game,
                masks,
            } => {
                if self.phase != Phase::Running {
                    return self.fail("act before reset");
                }
                let joint = match self.resolve_action(action, game, masks) {
                    Ok(a) => a,
                    Err(e) => return self.fail(format!("invalid action: {e}")),
                };
                match self.mode {
                    PlayMode::Agent => self.advance(&joint),
                    PlayMode::Human => {
                        self.pending = Some(joint);
                        Vec::new()
                    }
                }
            }
            ClientMessage::Bye {} => self.close(true),
        }
    }

    /// One clock tick in human mode: steps with the latest input, or with
    /// (noop, Stay) when none arrived.
    pub fn tick(&mut self) -> Vec<Outgoing> {
        if !self.is_paced() {
            return Vec::new();
        }
        let action = match self.pending.take() {
            Some(a) => a,
            None => {
                let env = &self
                    .episode
                    .as_ref()
                    .expect("running session has an episode")
                    .env;
                JointAction::holding(env.source().noop_action(), env.config().masks.len())
            }
        };
        self.advance(&action)
    }

    fn configure(&mut self, game: Option<GameKind>, env: Option<Value>) -> Result<Vec<Outgoing>> {
        let game = game.unwrap_or(self.defaults.game);
        let mut merged = serde_json::to_value(&self.defaults.env)?;
        if let Some(overrides) = env {
            merge_json(&mut merged, overrides);
        }
        let env_cfg: EnvConfig = serde_json::from_value(merged)?;
        let probe = MaskedEnv::new(env_cfg.clone(), game.make())?;
        let space = probe.action_space();
        self.game = game;
        self.env_cfg = env_cfg.clone();
        Ok(vec![Outgoing::Text(ServerMessage::Configure {
            game,
            env: env_cfg,
            n_game: space.n_game,
            n_masks: space.n_masks,
            total_actions: space.total_actions()?,
        })])
    }

    fn reset(&mut self) -> Result<Vec<Outgoing>> {
        let mut out = Vec::new();
        // an unfinished human episode is recorded as incomplete
        if let Some(rec) = self.take_record(false) {
            out.push(Outgoing::Record(rec));
        }
        let mut env = MaskedEnv::new(self.env_cfg.clone(), self.game.make())?;
        let episode = self.next_episode;
        let (_, info) = env.reset_episode(episode)?;
        self.next_episode += 1;
        let header = Header::new(self.game, &self.env_cfg, &info);
        self.episode = Some(Episode {
            env,
            trajectory: Trajectory::new(header),
            score: 0,
            total_reward: 0.0,
        });
        self.pending = None;
        self.phase = Phase::Running;
        out.push(Outgoing::Text(ServerMessage::Reset {
            episode,
            noops: info.noops,
        }));
        out.push(Outgoing::Binary(self.frame_bytes()?));
        Ok(out)
    }

    fn resolve_action(
        &self,
        action: Option<u64>,
        game: Option<u32>,
        masks: Option<Vec<Direction>>,
    ) -> Result<JointAction> {
        let env = &self
            .episode
            .as_ref()
            .expect("running session has an episode")
            .env;
        let space = env.action_space();
        let joint = match (action, game, masks) {
            (Some(i), None, None) => space.decode(i)?,
            (None, game, masks) => JointAction {
                game: game.unwrap_or(env.source().noop_action()),
                mask_dirs: masks
                    .map(|m| m.into_iter().collect())
                    .unwrap_or_else(|| JointAction::holding(0, space.n_masks as usize).mask_dirs),
            },
            _ => {
                return Err(Error::InvalidAction(
                    "give either `action` or `game`/`masks`, not both".into(),
                ))
            }
        };
        space.validate(&joint)?;
        Ok(joint)
    }

    fn advance(&mut self, action: &JointAction) -> Vec<Outgoing> {
        match self.try_advance(action) {
            Ok(out) => out,
            Err(e) => self.fail(format!("step failed: {e}")),
        }
    }

    fn try_advance(&mut self, action: &JointAction) -> Result<Vec<Outgoing>> {
        let ep = self
            .episode
            .as_mut()
            .expect("running session has an episode");
        let space = ep.env.action_space();
        let index = space.encode(action)?;
        let r = ep.env.step(action)?;
        let t = ep.trajectory.steps.len() as u64;
        let executed = space.encode(&r.info.executed)?;
        ep.trajectory
            .steps
            .push(StepRecord::new(t, index, executed, &r));
        ep.score += r.info.raw;
        ep.total_reward += r.reward;
        let (score, total_reward) = (ep.score, ep.total_reward);

        let mut out = vec![Outgoing::Binary(self.frame_bytes()?)];
        out.push(Outgoing::Text(ServerMessage::Score {
            step: t + 1,
            raw: r.info.raw,
            aux: r.info.aux,
            reward: r.reward,
            score,
            total_reward,
            terminal: r.terminal,
        }));
        if r.terminal {
            self.phase = Phase::Terminal;
            out.push(Outgoing::Text(ServerMessage::Terminal {
                step: t + 1,
                score,
                total_reward,
            }));
            if let Some(rec) = self.take_record(true) {
                out.push(Outgoing::Record(rec));
            }
        }
        Ok(out)
    }

    fn frame_bytes(&self) -> Result<Vec<u8>> {
        let ep = self
            .episode
            .as_ref()
            .expect("frame requested without an episode");
        let env = &ep.env;
        let obs = env.observation().expect("reset pushed a frame");
        let native = env.native_frame().expect("reset rendered a frame");
        let envelope = FrameEnvelope {
            kind: "frame".into(),
            episode: self.next_episode - 1,
            step: ep.trajectory.steps.len() as u64,
            score: ep.score,
            obs: Dims {
                height: obs.newest().height(),
                width: obs.newest().width(),
            },
            native: Dims {
                height: native.height(),
                width: native.width(),
            },
            rects: env.mask_rects().into_iter().map(|r| r.into_vec()).collect(),
            masks: env
                .mask_states()
                .iter()
                .map(|s| [s.center_row, s.center_col])
                .collect(),
            decay: env.config().decay.enabled,
        };
        encode_frame(&envelope, obs.newest(), native)
    }
}

/// Recursively overlays `patch` onto `base`; objects merge key by key,
/// everything else is replaced.
pub fn merge_json(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
