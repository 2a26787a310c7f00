use std::fs;
use std::io::BufReader;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mask_atari::aig::AuxReward;
use mask_atari::games::GameKind;
use mask_atari::geometry::{BoundaryMode, InitMode};
use mask_atari::harness::{self, render_table, PolicyKind, RunConfig, SweepGrid, Trajectory};
use mask_atari::session::{PlayMode, SessionDefaults, DEFAULT_STEPS_PER_SEC};
use mask_atari_session::{EpisodeStore, ServerState};

#[derive(Parser, Debug)]
#[command(
    name = "mask-atari",
    version,
    about = "Masked-observation arcade environments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run episodes and report mean_last_100.
    Run(RunArgs),
    /// Run one configuration per grid cell and print a summary table.
    Sweep(SweepArgs),
    /// Re-execute a trajectory log and verify it step by step.
    Replay(ReplayArgs),
    /// Start the live session service.
    Serve(ServeArgs),
    /// Summarize recorded human episodes per game and player.
    Baseline(BaselineArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Boundary {
    Stop,
    Slip,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Init {
    Center,
    Random,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Aux {
    None,
    Novelty,
    Coverage,
}

/// Options shared by every command that builds environments. Flags override
/// values from `--config`.
#[derive(Args, Debug, Default, Clone)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// sprite_chase or rider.
    #[arg(long)]
    game: Option<GameKind>,
    /// Mask side length in pixels, both axes.
    #[arg(long)]
    mask_scale: Option<u32>,
    /// Mask speed in pixels per step.
    #[arg(long)]
    mask_speed: Option<u32>,
    /// Number of masks, each a copy of the first.
    #[arg(long)]
    masks: Option<u32>,
    #[arg(long, value_enum)]
    boundary: Option<Boundary>,
    #[arg(long, value_enum)]
    init: Option<Init>,
    /// Enable three-layer resolution decay (single mask only).
    #[arg(long)]
    decay: bool,
    #[arg(long, value_enum)]
    aux: Option<Aux>,
    #[arg(long)]
    aux_weight: Option<f64>,
    #[arg(long)]
    sticky_prob: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(g) = self.game {
            cfg.game = g;
        }
        let env = &mut cfg.env;
        let mut template = env.masks.first().copied().unwrap_or_default();
        if let Some(s) = self.mask_scale {
            template.scale_h = s;
            template.scale_w = s;
        }
        if let Some(v) = self.mask_speed {
            template.speed = v;
        }
        if let Some(b) = self.boundary {
            template.boundary = match b {
                Boundary::Stop => BoundaryMode::Stopping,
                Boundary::Slip => BoundaryMode::SlipThrough,
            };
        }
        if let Some(i) = self.init {
            template.init = match i {
                Init::Center => InitMode::Center,
                Init::Random => InitMode::Random,
            };
        }
        let touched = self.mask_scale.is_some()
            || self.mask_speed.is_some()
            || self.boundary.is_some()
            || self.init.is_some();
        match self.masks {
            Some(n) => env.masks = vec![template; n as usize],
            None if touched => {
                for m in env.masks.iter_mut() {
                    *m = template;
                }
            }
            None => {}
        }
        if self.decay {
            env.decay.enabled = true;
        }
        if let Some(a) = self.aux {
            env.aux_reward = match a {
                Aux::None => AuxReward::None,
                Aux::Novelty => AuxReward::Novelty,
                Aux::Coverage => AuxReward::Coverage,
            };
        }
        if let Some(w) = self.aux_weight {
            env.aux_weight = w;
        }
        if let Some(p) = self.sticky_prob {
            env.sticky_prob = p;
        }
        if let Some(s) = self.seed {
            env.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    episodes: Option<u32>,
    /// Worker threads.
    #[arg(long)]
    parallel: Option<u32>,
    /// random, noop, or cycle:<i>,<j>,...
    #[arg(long)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    max_steps: Option<u64>,
    /// Output directory for config.toml, metrics.json and trajectories.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a trajectory log per episode (needs --out).
    #[arg(long)]
    log_trajectories: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = self.config.resolve()?;
        if let Some(n) = self.episodes {
            cfg.episodes = n;
        }
        if let Some(p) = self.parallel {
            cfg.parallel = p;
        }
        if let Some(p) = &self.policy {
            cfg.policy = p.clone();
        }
        if let Some(m) = self.max_steps {
            cfg.max_steps = m;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if self.log_trajectories {
            cfg.log_trajectories = true;
        }
        if cfg.log_trajectories && cfg.out.is_none() {
            bail!("--log-trajectories needs an output directory (--out)");
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Named grid: scale, speed or masks.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_delimiter = ',')]
    scales: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    speeds: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    mask_counts: Vec<u32>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Trajectory log (.jsonl).
    path: PathBuf,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value = "127.0.0.1:8765")]
    bind: SocketAddr,
    /// Sessions default to human mode: server-paced and recorded.
    #[arg(long)]
    human: bool,
    #[arg(long, default_value_t = DEFAULT_STEPS_PER_SEC)]
    steps_per_sec: f64,
    /// Directory for the daily episode files.
    #[arg(long, default_value = "episodes")]
    store: PathBuf,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long, default_value = "episodes")]
    store: PathBuf,
}

fn cmd_baseline(args: &BaselineArgs) -> Result<()> {
    let records = mask_atari_session::read_dir(&args.store)
        .with_context(|| format!("reading {}", args.store.display()))?;
    print!(
        "{}",
        mask_atari_session::render_baseline(&mask_atari_session::baseline(&records))
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let m = harness::run(&cfg)?;
    println!(
        "game={} episodes={} actions={} mean_last_100={:.3} raw_mean_last_100={:.3} secs={:.2}",
        cfg.game,
        m.returns.len(),
        m.total_actions,
        m.mean_last_100,
        m.raw_mean_last_100,
        m.wall_clock_secs
    );
    if let Some(out) = &cfg.out {
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let base = args.run.resolve()?;
    let mut grid = match &args.preset {
        Some(name) => {
            SweepGrid::preset(name).with_context(|| format!("unknown preset `{name}`"))?
        }
        None => SweepGrid::default(),
    };
    if !args.scales.is_empty() {
        grid.scales = args.scales.clone();
    }
    if !args.speeds.is_empty() {
        grid.speeds = args.speeds.clone();
    }
    if !args.mask_counts.is_empty() {
        grid.masks = args.mask_counts.clone();
    }
    let rows = harness::sweep(&base, &grid);
    let table = render_table(&base.game.to_string(), &rows);
    print!("{table}");
    if let Some(out) = &base.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("summary.md"), &table)?;
    }
    Ok(())
}

fn cmd_replay(args: &ReplayArgs) -> Result<()> {
    let file =
        fs::File::open(&args.path).with_context(|| format!("opening {}", args.path.display()))?;
    let traj = Trajectory::read_jsonl(BufReader::new(file))?;
    let report = harness::replay(&traj)?;
    println!(
        "replay ok: steps={} raw={} reward={} terminal={}",
        report.steps, report.total_raw, report.total_reward, report.terminal
    );
    Ok(())
}

fn cmd_serve(args: &ServeArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    cfg.env.validate(cfg.game.make().window())?;
    if !(args.steps_per_sec.is_finite() && args.steps_per_sec > 0.0) {
        bail!("--steps-per-sec must be positive");
    }
    let defaults = SessionDefaults {
        game: cfg.game,
        env: cfg.env,
        mode: if args.human {
            PlayMode::Human
        } else {
            PlayMode::Agent
        },
        steps_per_sec: args.steps_per_sec,
    };
    let store = EpisodeStore::open(&args.store)
        .with_context(|| format!("opening episode store {}", args.store.display()))?;
    let state = ServerState::new(defaults, Some(store));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(mask_atari_session::serve(args.bind, state))?;
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Baseline(a) => cmd_baseline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
