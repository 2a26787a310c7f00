//! The masked environment: reset with random no-ops, sticky frameskipped
//! steps, one mask move per step, and reward assembly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::{apply_sticky, ActionSpaceSpec, JointAction};
use crate::aig::{AigTracker, AuxReward};
use crate::error::{Error, Result};
use crate::games::FrameSource;
use crate::geometry::{
    init_mask, mask_rect, step_mask, visibility_map, MaskRect, MaskSpec, MaskState, VisibilityMap,
    WindowSpec,
};
use crate::observation::{
    apply_hard_mask, apply_resolution_decay, downscale_84, to_grayscale, DecaySpec, FrameStack,
    GrayFrame, Observation, RgbFrame,
};
use crate::rng::{derive_seed, stream_rng, SimRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoopMode {
    /// Draw the count uniformly from `[1, noop_max]`.
    #[default]
    Uniform,
    /// Always execute exactly `noop_max` no-ops.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub masks: Vec<MaskSpec>,
    pub decay: DecaySpec,
    pub frameskip: u32,
    pub sticky_prob: f64,
    pub noop_max: u32,
    pub noop_mode: NoopMode,
    pub aux_reward: AuxReward,
    pub aux_weight: f64,
    /// Intensity written into unobservable pixels.
    pub fill: u8,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            masks: vec![MaskSpec::default()],
            decay: DecaySpec::default(),
            frameskip: 4,
            sticky_prob: 0.25,
            noop_max: 30,
            noop_mode: NoopMode::Uniform,
            aux_reward: AuxReward::None,
            aux_weight: 1.0,
            fill: 0,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self, window: WindowSpec) -> Result<()> {
        let invalid = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.frameskip == 0 {
            return invalid("frameskip must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.sticky_prob) {
            return invalid(format!("sticky_prob {} outside [0, 1)", self.sticky_prob));
        }
        if !self.aux_weight.is_finite() {
            return invalid("aux_weight must be finite".into());
        }
        for m in &self.masks {
            m.validate(window)?;
        }
        if self.decay.enabled {
            self.decay.validate()?;
            if self.masks.len() != 1 {
                return Err(Error::DecayWithMultipleMasks(self.masks.len()));
            }
        }
        Ok(())
    }
}

/// Native-resolution processing of one raw frame.
#[derive(Debug, Clone)]
pub struct ProcessedFrame {
    /// Masked (or foveated) grayscale frame at window size.
    pub native: GrayFrame,
    /// The same frame downscaled to 84x84.
    pub observed: GrayFrame,
}

/// grayscale, then mask or decay at native resolution, then downscale.
/// With no masks the frame is fully observable.
pub fn process_frame(
    frame: &RgbFrame,
    masks: &[(MaskSpec, MaskState)],
    decay: &DecaySpec,
    fill: u8,
) -> Result<ProcessedFrame> {
    let gray = to_grayscale(frame);
    let native = if masks.is_empty() {
        gray
    } else if decay.enabled {
        apply_resolution_decay(&gray, masks, decay)?
    } else {
        apply_hard_mask(&gray, &visibility_map(masks, frame.window()), fill)?
    };
    let observed = downscale_84(&native);
    Ok(ProcessedFrame { native, observed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    /// Game score accumulated over the skipped frames.
    pub raw: i64,
    pub aux: f64,
    pub mask_states: Vec<MaskState>,
    pub executed: JointAction,
    /// Whether sticky execution replaced the requested action.
    pub repeated: bool,
    pub raw_frames: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    /// `raw + aux_weight * aux`
    pub reward: f64,
    pub terminal: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResetInfo {
    pub episode: u64,
    pub episode_seed: u64,
    pub noops: u32,
    pub mask_states: Vec<MaskState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    Running,
    Terminal,
}

pub struct MaskedEnv<S = Box<dyn FrameSource>> {
    cfg: EnvConfig,
    source: S,
    window: WindowSpec,
    space: ActionSpaceSpec,
    masks: Vec<MaskState>,
    stack: FrameStack,
    aig: AigTracker,
    previous: Option<JointAction>,
    sticky_rng: SimRng,
    next_episode: u64,
    phase: Phase,
    steps: u64,
    raw_frames: u64,
    last_native: Option<GrayFrame>,
}

impl<S: FrameSource> MaskedEnv<S> {
    pub fn new(cfg: EnvConfig, source: S) -> Result<Self> {
        let window = source.window();
        cfg.validate(window)?;
        let space = ActionSpaceSpec::new(source.n_game_actions(), cfg.masks.len() as u32);
        space.total_actions()?;
        Ok(Self {
            aig: AigTracker::new(cfg.aux_reward),
            sticky_rng: stream_rng(cfg.seed, Stream::Sticky),
            cfg,
            source,
            window,
            space,
            masks: Vec::new(),
            stack: FrameStack::new(),
            previous: None,
            next_episode: 0,
            phase: Phase::Idle,
            steps: 0,
            raw_frames: 0,
            last_native: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn action_space(&self) -> ActionSpaceSpec {
        self.space
    }

    pub fn window(&self) -> WindowSpec {
        self.window
    }

    pub fn source(&self) -> &S {
        &self.source
    }

    pub fn mask_states(&self) -> &[MaskState] {
        &self.masks
    }

    pub fn masks(&self) -> Vec<(MaskSpec, MaskState)> {
        self.cfg
            .masks
            .iter()
            .copied()
            .zip(self.masks.iter().copied())
            .collect()
    }

    /// Window-clipped rectangles of every mask, in mask order.
    pub fn mask_rects(&self) -> Vec<MaskRect> {
        self.masks()
            .iter()
            .map(|(spec, st)| mask_rect(st, spec, self.window))
            .collect()
    }

    pub fn visibility(&self) -> VisibilityMap {
        if self.masks.is_empty() {
            VisibilityMap::full(self.window)
        } else {
            visibility_map(&self.masks(), self.window)
        }
    }

    /// The latest masked native-resolution frame.
    pub fn native_frame(&self) -> Option<&GrayFrame> {
        self.last_native.as_ref()
    }

    pub fn observation(&self) -> Option<Observation> {
        self.stack.observation()
    }

    pub fn is_terminal(&self) -> bool {
        self.phase == Phase::Terminal
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Raw frames consumed in the current episode, no-ops included.
    pub fn raw_frames(&self) -> u64 {
        self.raw_frames
    }

    /// Index of the episode that the next [`reset`](Self::reset) starts.
    pub fn next_episode(&self) -> u64 {
        self.next_episode
    }

    pub fn reset(&mut self) -> Result<(Observation, ResetInfo)> {
        self.reset_episode(self.next_episode)
    }

    /// Starts episode `episode`, whose randomness is fully determined by
    /// `(cfg.seed, episode)`.
    pub fn reset_episode(&mut self, episode: u64) -> Result<(Observation, ResetInfo)> {
        let episode_seed = derive_seed(self.cfg.seed, episode);
        self.next_episode = episode + 1;
        self.source
            .reset(derive_seed(episode_seed, Stream::Game as u64));
        self.raw_frames = 0;
        self.steps = 0;

        let noops = match (self.cfg.noop_max, self.cfg.noop_mode) {
            (0, _) => 0,
            (n, NoopMode::Fixed) => n,
            (n, NoopMode::Uniform) => stream_rng(episode_seed, Stream::NoOps).random_range(1..=n),
        };
        let noop = self.source.noop_action();
        for _ in 0..noops {
            self.raw_frames += 1;
            if self.source.raw_step(noop).terminal {
                // the game ended during the no-op prefix: restart it without one
                self.source
                    .reset(derive_seed(episode_seed, Stream::Game as u64));
                break;
            }
        }

        let mut init_rng = stream_rng(episode_seed, Stream::MaskInit);
        self.masks = self
            .cfg
            .masks
            .iter()
            .map(|spec| init_mask(spec, self.window, &mut init_rng))
            .collect::<Result<_>>()?;
        self.sticky_rng = stream_rng(episode_seed, Stream::Sticky);
        self.previous = None;
        self.stack.clear();
        self.aig.reset();

        let (obs, _) = self.observe()?;
        self.phase = Phase::Running;
        Ok((
            obs,
            ResetInfo {
                episode,
                episode_seed,
                noops,
                mask_states: self.masks.clone(),
            },
        ))
    }

    fn observe(&mut self) -> Result<(Observation, f64)> {
        let masks = self.masks();
        let processed = process_frame(
            &self.source.render(),
            &masks,
            &self.cfg.decay,
            self.cfg.fill,
        )?;
        let window = self.window;
        let aux = self.aig.observe(&processed.observed, || {
            if masks.is_empty() {
                VisibilityMap::full(window)
            } else {
                visibility_map(&masks, window)
            }
        });
        let obs = self.stack.push(processed.observed);
        self.last_native = Some(processed.native);
        Ok((obs, aux))
    }

    pub fn step_index(&mut self, index: u64) -> Result<StepResult> {
        let action = self.space.decode(index)?;
        self.step(&action)
    }

    pub fn step(&mut self, action: &JointAction) -> Result<StepResult> {
        match self.phase {
            Phase::Idle => return Err(Error::NotReset),
            Phase::Terminal => return Err(Error::SteppedAfterTerminal),
            Phase::Running => {}
        }
        self.space.validate(action)?;
        let (executed, repeated) = apply_sticky(
            action,
            self.previous.as_ref(),
            self.cfg.sticky_prob,
            &mut self.sticky_rng,
        );

        let mut raw = 0i64;
        let mut terminal = false;
        let mut raw_frames = 0;
        for _ in 0..self.cfg.frameskip {
            let out = self.source.raw_step(executed.game);
            raw += out.score_delta;
            raw_frames += 1;
            if out.terminal {
                terminal = true;
                break;
            }
        }
        self.raw_frames += raw_frames as u64;

        for ((state, spec), dir) in self
            .masks
            .iter_mut()
            .zip(&self.cfg.masks)
            .zip(&executed.mask_dirs)
        {
            *state = step_mask(state, *dir, spec, self.window);
        }

        let (observation, aux) = self.observe()?;
        self.steps += 1;
        self.previous = Some(executed.clone());
        if terminal {
            self.phase = Phase::Terminal;
        }
        Ok(StepResult {
            observation,
            reward: raw as f64 + self.cfg.aux_weight * aux,
            terminal,
            info: StepInfo {
                raw,
                aux,
                mask_states: self.masks.clone(),
                executed,
                repeated,
                raw_frames,
            },
        })
    }
}
