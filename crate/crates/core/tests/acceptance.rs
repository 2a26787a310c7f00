//! Acceptance suite. Every criterion runs against an oracle written here,
//! independently of the library internals, and reports one line:
//!
//! ```text
//! cargo test -p mask-atari --test acceptance
//! ```

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use mask_atari::action::{ActionSpaceSpec, JointAction};
use mask_atari::aig::{CoverageMerge, ObservationHistory};
use mask_atari::env::{EnvConfig, MaskedEnv};
use mask_atari::games::{FrameSource, GameKind, RawStep, Rider};
use mask_atari::geometry::{
    mask_rect, step_mask, visibility_map, BoundaryMode, Direction, InitMode, MaskSpec, MaskState,
    WindowSpec,
};
use mask_atari::harness::{self, mean_last_100, replay, PolicyKind, RunConfig, Trajectory};
use mask_atari::observation::{
    apply_resolution_decay, decay_layers, downscale_84, to_grayscale, DecaySpec, GrayFrame,
    RgbFrame,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rng(seed: u64) -> Xoshiro256StarStar {
    Xoshiro256StarStar::seed_from_u64(seed)
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($fmt)+)),
        }
    };
}

// ---------- oracles ----------

/// (row, col) unit steps in action-index order.
const DIR_TABLE: [(i64, i64); 9] = [
    (0, 0),
    (0, -1),
    (0, 1),
    (-1, 0),
    (1, 0),
    (-1, -1),
    (1, -1),
    (-1, 1),
    (1, 1),
];

fn covered(l: u32, len: u32, center: u32, x: u32) -> bool {
    let top = center as i64 - (l / 2) as i64;
    (x as i64 - top).rem_euclid(len as i64) < l as i64
}

fn oracle_visible(masks: &[(MaskSpec, MaskState)], win: WindowSpec, r: u32, c: u32) -> bool {
    masks.iter().any(|(s, st)| {
        covered(s.scale_h, win.height, st.center_row, r)
            && covered(s.scale_w, win.width, st.center_col, c)
    })
}

fn oracle_diag(v: u32) -> i64 {
    (v as f64 / std::f64::consts::SQRT_2).ceil() as i64
}

fn oracle_axis(c: u32, d: i64, l: u32, len: u32, mode: BoundaryMode) -> u32 {
    match mode {
        BoundaryMode::Stopping => {
            (c as i64 + d).clamp((l / 2) as i64, (len - l.div_ceil(2)) as i64) as u32
        }
        BoundaryMode::SlipThrough => (c as i64 + d).rem_euclid(len as i64) as u32,
    }
}

fn oracle_step(st: MaskState, dir_index: usize, s: &MaskSpec, win: WindowSpec) -> MaskState {
    let (sr, sc) = DIR_TABLE[dir_index];
    let mag = if sr != 0 && sc != 0 {
        oracle_diag(s.speed)
    } else {
        s.speed as i64
    };
    MaskState::new(
        oracle_axis(st.center_row, sr * mag, s.scale_h, win.height, s.boundary),
        oracle_axis(st.center_col, sc * mag, s.scale_w, win.width, s.boundary),
    )
}

fn random_center<R: Rng>(s: &MaskSpec, win: WindowSpec, rng: &mut R) -> MaskState {
    match s.boundary {
        BoundaryMode::Stopping => MaskState::new(
            rng.random_range(s.scale_h / 2..=win.height - s.scale_h.div_ceil(2)),
            rng.random_range(s.scale_w / 2..=win.width - s.scale_w.div_ceil(2)),
        ),
        BoundaryMode::SlipThrough => MaskState::new(
            rng.random_range(0..win.height),
            rng.random_range(0..win.width),
        ),
    }
}

fn random_spec<R: Rng>(win: WindowSpec, mode: BoundaryMode, rng: &mut R) -> MaskSpec {
    MaskSpec {
        scale_h: rng.random_range(1..=win.height),
        scale_w: rng.random_range(1..=win.width),
        speed: rng.random_range(1..=2 * win.height.max(win.width)),
        boundary: mode,
        init: InitMode::Center,
    }
}

/// Layer of a pixel: 0 mask, 1 middle (1.5x, rounded half up, clipped), 2 outer.
fn oracle_layer(s: &MaskSpec, st: &MaskState, win: WindowSpec, r: u32, c: u32) -> u8 {
    if covered(s.scale_h, win.height, st.center_row, r)
        && covered(s.scale_w, win.width, st.center_col, c)
    {
        return 0;
    }
    let mh = (3 * s.scale_h as i64 + 1) / 2;
    let mw = (3 * s.scale_w as i64 + 1) / 2;
    let top = st.center_row as i64 - mh / 2;
    let left = st.center_col as i64 - mw / 2;
    let (r, c) = (r as i64, c as i64);
    if r >= top && r < top + mh && c >= left && c < left + mw {
        1
    } else {
        2
    }
}

fn oracle_decay(frame: &GrayFrame, s: &MaskSpec, st: &MaskState) -> Vec<u8> {
    let win = frame.window();
    let (h, w) = (win.height, win.width);
    let layer = |r, c| oracle_layer(s, st, win, r, c);
    let mut out = frame.pixels().to_vec();
    for (lay, b) in [(1u8, 2u32), (2, 4)] {
        for br in (0..h).step_by(b as usize) {
            for bc in (0..w).step_by(b as usize) {
                let cells: Vec<(u32, u32)> = (br..(br + b).min(h))
                    .flat_map(|r| (bc..(bc + b).min(w)).map(move |c| (r, c)))
                    .filter(|&(r, c)| layer(r, c) == lay)
                    .collect();
                if cells.is_empty() {
                    continue;
                }
                let sum: u64 = cells.iter().map(|&(r, c)| frame.get(r, c) as u64).sum();
                let mean = Ratio::new(sum, cells.len() as u64).round().to_integer() as u8;
                for (r, c) in cells {
                    out[(r * w + c) as usize] = mean;
                }
            }
        }
    }
    out
}

fn random_gray<R: Rng>(h: u32, w: u32, rng: &mut R) -> GrayFrame {
    GrayFrame::from_pixels(h, w, (0..h * w).map(|_| rng.random()).collect()).unwrap()
}

/// A game that never ends and draws nothing; isolates the action pipeline.
struct Blank;

impl FrameSource for Blank {
    fn window(&self) -> WindowSpec {
        WindowSpec::new(16, 16).unwrap()
    }
    fn n_game_actions(&self) -> u32 {
        4
    }
    fn noop_action(&self) -> u32 {
        0
    }
    fn reset(&mut self, _seed: u64) {}
    fn raw_step(&mut self, _action: u32) -> RawStep {
        RawStep::default()
    }
    fn render(&self) -> RgbFrame {
        RgbFrame::filled(self.window(), [9, 9, 9])
    }
}

// ---------- criteria ----------

fn geometry_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(0xA11CE);
    let mut checked_px = 0u64;
    for config in 0..1000 {
        let win = WindowSpec::new(rng.random_range(1..=64), rng.random_range(1..=64)).unwrap();
        let n_masks = rng.random_range(0..=3);
        for mode in [BoundaryMode::Stopping, BoundaryMode::SlipThrough] {
            let specs: Vec<MaskSpec> = (0..n_masks)
                .map(|_| random_spec(win, mode, &mut rng))
                .collect();
            let mut states: Vec<MaskState> = specs
                .iter()
                .map(|s| random_center(s, win, &mut rng))
                .collect();
            for t in 0..=100 {
                if t > 0 {
                    for (st, spec) in states.iter_mut().zip(&specs) {
                        let d = rng.random_range(0..9);
                        let got = step_mask(st, Direction::from_index(d).unwrap(), spec, win);
                        let want = oracle_step(*st, d, spec, win);
                        ensure!(
                            got == want,
                            "config {config} step {t}: moved to {got:?}, oracle {want:?}"
                        );
                        *st = got;
                    }
                }
                let masks: Vec<(MaskSpec, MaskState)> =
                    specs.iter().copied().zip(states.iter().copied()).collect();
                for (spec, st) in &masks {
                    let rect = mask_rect(st, spec, win);
                    let area: usize = rect.iter().map(|r| r.area()).sum();
                    ensure!(
                        area == (spec.scale_h * spec.scale_w) as usize,
                        "config {config}: area not preserved"
                    );
                    match mode {
                        BoundaryMode::Stopping => ensure!(
                            rect.len() == 1
                                && rect[0].top + rect[0].height <= win.height
                                && rect[0].left + rect[0].width <= win.width,
                            "config {config} step {t}: stopping mask left the window"
                        ),
                        BoundaryMode::SlipThrough => ensure!(
                            st.center_row < win.height && st.center_col < win.width,
                            "config {config} step {t}: wrapped center out of range"
                        ),
                    }
                }
                let vis = visibility_map(&masks, win);
                for r in 0..win.height {
                    for c in 0..win.width {
                        ensure!(
                            vis.get(r, c) == oracle_visible(&masks, win, r, c),
                            "config {config} step {t}: pixel ({r},{c}) differs"
                        );
                    }
                }
                checked_px += win.area() as u64;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.2}s");
    Ok(format!(
        "2000 runs x 101 maps, {checked_px} pixels, {secs:.2}s"
    ))
}

fn diagonal_rule() -> Outcome {
    for v in 1..=200u32 {
        let d = oracle_diag(v);
        // d is the ceiling: 2(d-1)^2 < v^2 <= 2d^2
        ensure!(
            2 * (d - 1) * (d - 1) < (v * v) as i64 && (v * v) as i64 <= 2 * d * d,
            "oracle off at {v}"
        );
        for (i, &(sr, sc)) in DIR_TABLE.iter().enumerate().skip(5) {
            let got = Direction::from_index(i).unwrap().displacement(v);
            ensure!(
                got == (sr * d, sc * d),
                "v={v} dir {i}: {got:?}, expected {:?}",
                (sr * d, sc * d)
            );
        }
        for (i, &(sr, sc)) in DIR_TABLE.iter().enumerate().take(5) {
            let got = Direction::from_index(i).unwrap().displacement(v);
            ensure!(
                got == (sr * v as i64, sc * v as i64),
                "v={v} cardinal dir {i}: {got:?}"
            );
        }
    }
    Ok("v in 1..=200 exact".into())
}

fn action_space() -> Outcome {
    for (n_masks, expected) in [(1u32, 162u64), (2, 1458)] {
        let space = ActionSpaceSpec::new(18, n_masks);
        let total = space.total_actions().map_err(|e| e.to_string())?;
        ensure!(
            total == expected && total > 90,
            "(18,{n_masks}) gave {total}"
        );
        let mut seen = vec![false; total as usize];
        for i in 0..total {
            let a = space.decode(i).map_err(|e| e.to_string())?;
            // mixed radix, game digit most significant
            let mut idx = a.game as u64;
            for d in &a.mask_dirs {
                idx = idx * 9 + d.index() as u64;
            }
            ensure!(idx == i, "decode({i}) = {a:?}");
            ensure!(
                space.encode(&a).map_err(|e| e.to_string())? == i,
                "encode(decode({i})) != {i}"
            );
            ensure!(!seen[idx as usize], "duplicate {i}");
            seen[idx as usize] = true;
        }
        ensure!(space.decode(total).is_err(), "index {total} accepted");
    }
    Ok("162 and 1458, bijective".into())
}

fn resolution_decay() -> Outcome {
    let mut rng = rng(0xDECA1);
    for case in 0..500 {
        let win = WindowSpec::new(rng.random_range(1..=32), rng.random_range(1..=32)).unwrap();
        let mode = if rng.random() {
            BoundaryMode::Stopping
        } else {
            BoundaryMode::SlipThrough
        };
        let spec = random_spec(win, mode, &mut rng);
        let st = random_center(&spec, win, &mut rng);
        let frame = random_gray(win.height, win.width, &mut rng);
        let got = apply_resolution_decay(&frame, &[(spec, st)], &DecaySpec::enabled())
            .map_err(|e| e.to_string())?;
        ensure!(
            got.pixels() == oracle_decay(&frame, &spec, &st).as_slice(),
            "case {case}: {spec:?} {st:?}"
        );

        let v = rng.random();
        let flat = GrayFrame::filled(win.height, win.width, v);
        let out = apply_resolution_decay(&flat, &[(spec, st)], &DecaySpec::enabled())
            .map_err(|e| e.to_string())?;
        ensure!(out == flat, "case {case}: constant {v} not fixed");
    }

    // region membership on the full window: mask, 1.5x middle ring, outer
    let win = WindowSpec::ATARI;
    for (scale, expected) in [
        (100u32, [10_000usize, 12_500, 11_100]),
        (130, [16_900, 14_300, 2_400]),
    ] {
        let spec = MaskSpec::square(scale, 50, BoundaryMode::Stopping);
        let st = MaskState::new(105, 80);
        let layers = decay_layers(&spec, &st, win, &DecaySpec::enabled());
        let counts = [0u8, 1, 2].map(|l| layers.iter().filter(|&&x| x == l).count());
        ensure!(
            counts == expected,
            "scale {scale}: layer sizes {counts:?}, expected {expected:?}"
        );
        for r in 0..win.height {
            for c in 0..win.width {
                let i = (r * win.width + c) as usize;
                ensure!(
                    layers[i] == oracle_layer(&spec, &st, win, r, c),
                    "scale {scale}: ({r},{c})"
                );
            }
        }
    }
    Ok("500 frames bit-exact, constants fixed, region counts 10000/12500/11100".into())
}

fn aux_rewards() -> Outcome {
    let mut rng = rng(0xA16);
    let mut min = 0.0f64;
    for trial in 0..100_000 {
        let mut h = ObservationHistory::new();
        let mut frames = Vec::new();
        for _ in 0..5 {
            let sparsity: f64 = rng.random();
            let px: Vec<u8> = (0..36)
                .map(|_| {
                    if rng.random::<f64>() < sparsity {
                        0
                    } else {
                        rng.random()
                    }
                })
                .collect();
            let f = GrayFrame::from_pixels(6, 6, px).unwrap();
            h.push(&f);
            frames.push(f);
        }
        let r = h.novelty_reward();
        ensure!(
            (-1.0 - 1e-12..=0.0).contains(&r),
            "trial {trial}: novelty {r}"
        );
        min = min.min(r);
        if trial % 100 == 0 {
            // naive reference: -0.25 * sum_i cos(f_i, f_new)
            let norm = |f: &GrayFrame| {
                f.pixels()
                    .iter()
                    .map(|&x| (x as f64).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            let newest = &frames[4];
            let mut want = 0.0;
            for f in &frames[..4] {
                let dot: f64 = f
                    .pixels()
                    .iter()
                    .zip(newest.pixels())
                    .map(|(&a, &b)| a as f64 * b as f64)
                    .sum();
                let denom = norm(f) * norm(newest);
                if denom > 0.0 {
                    want += dot / denom;
                }
            }
            want *= -0.25;
            ensure!(
                (r - want).abs() <= 1e-12 * want.abs().max(1e-300),
                "trial {trial}: {r} vs {want}"
            );
        }
    }
    for _ in 0..200 {
        let f = random_gray(84, 84, &mut rng);
        let mut h = ObservationHistory::new();
        for _ in 0..5 {
            h.push(&f);
        }
        let r = h.novelty_reward();
        ensure!((r + 1.0).abs() <= 1e-12, "identical frames gave {r}");
    }

    let mut rewarded = 0;
    for traj in 0..10_000 {
        let win = WindowSpec::new(rng.random_range(1..=32), rng.random_range(1..=32)).unwrap();
        let mode = if rng.random() {
            BoundaryMode::Stopping
        } else {
            BoundaryMode::SlipThrough
        };
        let specs: Vec<MaskSpec> = (0..rng.random_range(1..=2))
            .map(|_| random_spec(win, mode, &mut rng))
            .collect();
        let mut states: Vec<MaskState> = specs
            .iter()
            .map(|s| random_center(s, win, &mut rng))
            .collect();
        let mut merge = CoverageMerge::new();
        let mut maps: Vec<Vec<bool>> = Vec::new();
        for t in 0..rng.random_range(5..=12) {
            if t > 0 {
                for (st, s) in states.iter_mut().zip(&specs) {
                    *st = oracle_step(*st, rng.random_range(0..9), s, win);
                }
            }
            let masks: Vec<_> = specs.iter().copied().zip(states.iter().copied()).collect();
            let bits: Vec<bool> = (0..win.height)
                .flat_map(|r| (0..win.width).map(move |c| (r, c)))
                .map(|(r, c)| oracle_visible(&masks, win, r, c))
                .collect();
            merge.push(visibility_map(&masks, win));
            maps.push(bits);
            let r = merge.coverage_reward();
            if maps.len() < 5 {
                ensure!(r == 0.0, "traj {traj}: reward {r} before five steps");
                continue;
            }
            let n = maps.len();
            let fresh = (0..maps[n - 1].len())
                .filter(|&i| maps[n - 1][i] && !maps[n - 5..n - 1].iter().any(|m| m[i]))
                .count() as u64;
            ensure!(
                r == (fresh as f64).sqrt(),
                "traj {traj} t {t}: reward {r}, fresh {fresh}"
            );
            ensure!(
                (r * r).round() as u64 == fresh,
                "traj {traj} t {t}: r^2 {} vs {fresh}",
                r * r
            );
            rewarded += (fresh > 0) as u32;
        }
    }

    // worked case: 100x100 mask, four still steps, then 50 columns right
    let win = WindowSpec::ATARI;
    let spec = MaskSpec::square(100, 50, BoundaryMode::Stopping);
    let mut st = MaskState::new(105, 55);
    let mut merge = CoverageMerge::new();
    for _ in 0..4 {
        merge.push(visibility_map(&[(spec, st)], win));
    }
    st = step_mask(&st, Direction::R, &spec, win);
    merge.push(visibility_map(&[(spec, st)], win));
    let r = merge.coverage_reward();
    ensure!(
        (r - 70.710_678_118_654_75).abs() <= 1e-9,
        "worked case gave {r}"
    );
    Ok(format!(
        "novelty min {min:.15}, {rewarded} rewarded coverage steps exact, worked case {r:.10}"
    ))
}

fn sticky_actions() -> Outcome {
    let cfg = EnvConfig {
        masks: vec![MaskSpec::square(4, 1, BoundaryMode::SlipThrough)],
        noop_max: 0,
        seed: 0x571C,
        ..EnvConfig::default()
    };
    let mut env = MaskedEnv::new(cfg, Blank).map_err(|e| e.to_string())?;
    let total = env
        .action_space()
        .total_actions()
        .map_err(|e| e.to_string())?;
    let mut policy = rng(7);
    let (mut transitions, mut repeats) = (0u64, 0u64);
    for episode in 0..10 {
        env.reset_episode(episode).map_err(|e| e.to_string())?;
        for t in 0..10_001 {
            let r = env
                .step_index(policy.random_range(0..total))
                .map_err(|e| e.to_string())?;
            if t == 0 {
                ensure!(!r.info.repeated, "repeat on the first step");
                continue;
            }
            transitions += 1;
            repeats += r.info.repeated as u64;
        }
    }
    let rate = repeats as f64 / transitions as f64;
    ensure!(
        transitions == 100_000 && (rate - 0.25).abs() <= 0.005,
        "rate {rate} over {transitions}"
    );
    Ok(format!(
        "repeat rate {rate:.5} over {transitions} transitions"
    ))
}

fn determinism_and_replay() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut configs = Vec::new();
    for game in GameKind::ALL {
        let mut base = RunConfig {
            game,
            policy: PolicyKind::Random,
            episodes: 3,
            parallel: 3,
            max_steps: 150,
            log_trajectories: true,
            ..RunConfig::default()
        };
        base.env.seed = 99;
        configs.push(base.clone());

        let mut two = base.clone();
        two.env.masks = vec![
            MaskSpec {
                init: InitMode::Random,
                ..MaskSpec::square(70, 30, BoundaryMode::SlipThrough)
            },
            MaskSpec::square(40, 10, BoundaryMode::Stopping),
        ];
        two.env.aux_reward = mask_atari::aig::AuxReward::Coverage;
        configs.push(two);

        let mut fov = base.clone();
        fov.env.decay.enabled = true;
        fov.env.aux_reward = mask_atari::aig::AuxReward::Novelty;
        fov.env.aux_weight = 0.5;
        configs.push(fov);
    }
    let mut logs = 0;
    for (i, cfg) in configs.iter().enumerate() {
        let mut outs = Vec::new();
        for (run, parallel) in [(0, cfg.parallel), (1, 1)] {
            let mut c = cfg.clone();
            c.parallel = parallel;
            c.out = Some(dir.path().join(format!("cfg{i}_run{run}")));
            outs.push(harness::run(&c).map_err(|e| e.to_string())?);
        }
        ensure!(
            outs[0].same_results(&outs[1]),
            "config {i}: metrics differ between runs"
        );
        for ep in 0..cfg.episodes {
            let name = format!("trajectories/episode_{ep:05}.jsonl");
            let a = std::fs::read(dir.path().join(format!("cfg{i}_run0")).join(&name))
                .map_err(|e| e.to_string())?;
            let b = std::fs::read(dir.path().join(format!("cfg{i}_run1")).join(&name))
                .map_err(|e| e.to_string())?;
            ensure!(a == b, "config {i} episode {ep}: logs differ");
            let traj = Trajectory::read_jsonl(&a[..]).map_err(|e| e.to_string())?;
            let report = replay(&traj).map_err(|e| format!("config {i} episode {ep}: {e}"))?;
            ensure!(
                report.total_raw == traj.total_raw()
                    && report.total_reward.to_bits() == traj.total_reward().to_bits()
                    && report.steps == traj.steps.len() as u64,
                "config {i} episode {ep}: replay totals differ"
            );
            logs += 1;
        }
    }
    Ok(format!(
        "{} configs, {logs} logs identical across runs and replayed exactly",
        configs.len()
    ))
}

fn mdp_recovery() -> Outcome {
    let mut frames = 0;
    for game in GameKind::ALL {
        let full = EnvConfig {
            masks: vec![MaskSpec::full_window(WindowSpec::ATARI)],
            seed: 31,
            ..EnvConfig::default()
        };
        let none = EnvConfig {
            masks: vec![],
            ..full.clone()
        };
        let mut a = MaskedEnv::new(full, game.make()).map_err(|e| e.to_string())?;
        let mut b = MaskedEnv::new(none, game.make()).map_err(|e| e.to_string())?;
        let (oa, _) = a.reset().map_err(|e| e.to_string())?;
        let (ob, _) = b.reset().map_err(|e| e.to_string())?;
        ensure!(oa == ob, "{game}: reset observations differ");
        let n_game = a.source().n_game_actions();
        let mut policy = rng(5);
        for t in 0..100 {
            let g = policy.random_range(0..n_game);
            let d = Direction::from_index(policy.random_range(0..9)).unwrap();
            let ra = a
                .step(&JointAction::new(g, [d]))
                .map_err(|e| e.to_string())?;
            let rb = b
                .step(&JointAction::new(g, []))
                .map_err(|e| e.to_string())?;
            ensure!(
                ra.observation == rb.observation,
                "{game} step {t}: observations differ"
            );
            let direct = downscale_84(&to_grayscale(&a.source().render()));
            ensure!(
                *ra.observation.newest() == direct,
                "{game} step {t}: differs from the plain pipeline"
            );
            ensure!(
                ra.info.raw == rb.info.raw && ra.terminal == rb.terminal,
                "{game} step {t}: dynamics differ"
            );
            frames += 1;
            if ra.terminal {
                a.reset().map_err(|e| e.to_string())?;
                b.reset().map_err(|e| e.to_string())?;
            }
        }
    }
    Ok(format!("{frames} steps bit-identical on both games"))
}

fn rider_containment() -> Outcome {
    let win = WindowSpec::ATARI;
    let (row, start_col) = (Rider::PLAYER_ROW, Rider::PLAYER_START_COL);
    ensure!(
        row - Rider::SPAWN_ROW == 100,
        "spawn distance {}",
        row - Rider::SPAWN_ROW
    );
    let spawn = (Rider::SPAWN_ROW as u32, start_col as u32);
    let sees = |scale: u32, col: i64| {
        let spec = MaskSpec::square(scale, 50, BoundaryMode::Stopping);
        let st = MaskState::placed_at(row, col, &spec, win);
        mask_rect(&st, &spec, win)
            .iter()
            .any(|r| r.contains(spawn.0, col as u32))
    };
    ensure!(sees(130, start_col), "scale 130 misses the spawn point");
    ensure!(!sees(100, start_col), "scale 100 contains the spawn point");
    for col in 5..=155 {
        ensure!(sees(130, col) && !sees(100, col), "player column {col}");
    }
    Ok(format!("spawn {spawn:?}: inside at 130, outside at 100"))
}

fn harness_metric() -> Outcome {
    let returns: Vec<f64> = (1..=150).map(f64::from).collect();
    let m = mean_last_100(&returns);
    ensure!(m == Some(100.5), "got {m:?}");
    Ok("100.5".into())
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("geometry suite", geometry_suite),
        ("diagonal rule", diagonal_rule),
        ("action space", action_space),
        ("resolution decay", resolution_decay),
        ("aux rewards", aux_rewards),
        ("sticky actions", sticky_actions),
        ("determinism & replay", determinism_and_replay),
        ("mdp recovery", mdp_recovery),
        ("rider geometry", rider_containment),
        ("harness metric", harness_metric),
    ];
    let mut failed = Vec::new();
    let stdout = std::io::stdout();
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(format!(
                "panicked: {:?}",
                p.downcast_ref::<String>()
                    .map(String::as_str)
                    .or(p.downcast_ref::<&str>().copied())
            ))
        });
        let secs = start.elapsed().as_secs_f64();
        let line = match &outcome {
            Ok(detail) => format!("PASS  {name:<22} {detail} [{secs:.2}s]\n"),
            Err(why) => format!("FAIL  {name:<22} {why} [{secs:.2}s]\n"),
        };
        // written past the test harness capture so the summary always shows
        let _ = stdout.lock().write_all(line.as_bytes());
        if outcome.is_err() {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
