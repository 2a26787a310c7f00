//! Mask placement, movement and visibility.
//!
//! A mask is an axis-aligned rectangle anchored on a center pixel. For a
//! scale `l` and center `c` the covered rows are
//! `[c - floor(l/2), c + ceil(l/2) - 1]`, so even scales put the center on the
//! upper-left of the two middle pixels. Columns follow the same rule.

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Size of the game window in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSpec {
    pub height: u32,
    pub width: u32,
}

impl WindowSpec {
    /// Native Atari frame size.
    pub const ATARI: WindowSpec = WindowSpec {
        height: 210,
        width: 160,
    };

    pub fn new(height: u32, width: u32) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidWindow { height, width });
        }
        Ok(Self { height, width })
    }

    pub fn area(&self) -> usize {
        self.height as usize * self.width as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// The mask halts at the window edge.
    #[default]
    Stopping,
    /// The mask leaves through one edge and re-enters from the opposite one.
    SlipThrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    #[default]
    Center,
    Random,
}

/// Static mask parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskSpec {
    pub scale_h: u32,
    pub scale_w: u32,
    /// Pixels moved per agent step along a cardinal direction.
    pub speed: u32,
    pub boundary: BoundaryMode,
    pub init: InitMode,
}

impl Default for MaskSpec {
    fn default() -> Self {
        Self {
            scale_h: crate::DEFAULT_MASK_SCALE,
            scale_w: crate::DEFAULT_MASK_SCALE,
            speed: crate::DEFAULT_MASK_SPEED,
            boundary: BoundaryMode::Stopping,
            init: InitMode::Center,
        }
    }
}

impl MaskSpec {
    pub fn square(scale: u32, speed: u32, boundary: BoundaryMode) -> Self {
        Self {
            scale_h: scale,
            scale_w: scale,
            speed,
            boundary,
            init: InitMode::Center,
        }
    }

    /// A mask covering the whole window; it never hides anything.
    pub fn full_window(window: WindowSpec) -> Self {
        Self {
            scale_h: window.height,
            scale_w: window.width,
            speed: 1,
            boundary: BoundaryMode::Stopping,
            init: InitMode::Center,
        }
    }

    pub fn validate(&self, window: WindowSpec) -> Result<()> {
        if self.scale_h == 0
            || self.scale_w == 0
            || self.scale_h > window.height
            || self.scale_w > window.width
            || self.speed == 0
        {
            return Err(Error::InvalidMask {
                spec: *self,
                window,
            });
        }
        Ok(())
    }
}

/// Dynamic mask position: the center pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskState {
    pub center_row: u32,
    pub center_col: u32,
}

impl MaskState {
    pub fn new(center_row: u32, center_col: u32) -> Self {
        Self {
            center_row,
            center_col,
        }
    }

    /// Places the mask as close as possible to the requested center: clamped
    /// under `Stopping`, wrapped under `SlipThrough`.
    pub fn placed_at(row: i64, col: i64, spec: &MaskSpec, window: WindowSpec) -> Self {
        Self {
            center_row: settle_axis(row, spec.scale_h, window.height, spec.boundary),
            center_col: settle_axis(col, spec.scale_w, window.width, spec.boundary),
        }
    }

    pub fn is_valid(&self, spec: &MaskSpec, window: WindowSpec) -> bool {
        match spec.boundary {
            BoundaryMode::Stopping => {
                let (rlo, rhi) = containing_centers(spec.scale_h, window.height);
                let (clo, chi) = containing_centers(spec.scale_w, window.width);
                (rlo..=rhi).contains(&self.center_row) && (clo..=chi).contains(&self.center_col)
            }
            BoundaryMode::SlipThrough => {
                self.center_row < window.height && self.center_col < window.width
            }
        }
    }
}

/// The nine mask moves. The discriminant is the index used in joint-action
/// encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Direction {
    #[default]
    Stay = 0,
    L = 1,
    R = 2,
    U = 3,
    D = 4,
    LU = 5,
    LD = 6,
    RU = 7,
    RD = 8,
}

impl Direction {
    pub const COUNT: usize = 9;

    pub const ALL: [Direction; 9] = [
        Direction::Stay,
        Direction::L,
        Direction::R,
        Direction::U,
        Direction::D,
        Direction::LU,
        Direction::LD,
        Direction::RU,
        Direction::RD,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Unit signs `(row, col)`; up is negative rows.
    pub fn signs(self) -> (i64, i64) {
        match self {
            Direction::Stay => (0, 0),
            Direction::L => (0, -1),
            Direction::R => (0, 1),
            Direction::U => (-1, 0),
            Direction::D => (1, 0),
            Direction::LU => (-1, -1),
            Direction::LD => (1, -1),
            Direction::RU => (-1, 1),
            Direction::RD => (1, 1),
        }
    }

    pub fn is_diagonal(self) -> bool {
        let (r, c) = self.signs();
        r != 0 && c != 0
    }

    /// Per-axis `(row, col)` displacement for a mask moving at `speed`.
    pub fn displacement(self, speed: u32) -> (i64, i64) {
        let (r, c) = self.signs();
        let step = if self.is_diagonal() {
            diagonal_step(speed)
        } else {
            speed as i64
        };
        (r * step, c * step)
    }
}

/// `ceil(speed / sqrt(2))`, computed exactly as the smallest `d` with
/// `2 d^2 >= speed^2`.
pub fn diagonal_step(speed: u32) -> i64 {
    let v = speed as u128;
    let target = v * v;
    // sqrt(v^2 / 2) is within one of the float estimate
    let mut d = ((speed as f64) / std::f64::consts::SQRT_2).floor() as u128;
    d = d.saturating_sub(1);
    while 2 * d * d < target {
        d += 1;
    }
    d as i64
}

/// Inclusive range of centers along one axis whose span lies inside `len`.
pub fn containing_centers(scale: u32, len: u32) -> (u32, u32) {
    (scale / 2, len - scale.div_ceil(2))
}

fn settle_axis(pos: i64, scale: u32, len: u32, boundary: BoundaryMode) -> u32 {
    match boundary {
        BoundaryMode::Stopping => {
            let (lo, hi) = containing_centers(scale, len);
            pos.clamp(lo as i64, hi as i64) as u32
        }
        BoundaryMode::SlipThrough => pos.rem_euclid(len as i64) as u32,
    }
}

/// Axis-aligned rectangle inside the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub top: u32,
    pub left: u32,
    pub height: u32,
    pub width: u32,
}

impl Rect {
    pub fn contains(&self, row: u32, col: u32) -> bool {
        row >= self.top
            && row < self.top + self.height
            && col >= self.left
            && col < self.left + self.width
    }

    pub fn area(&self) -> usize {
        self.height as usize * self.width as usize
    }
}

/// Window-clipped pieces of a mask rectangle: one piece, or up to four when
/// the mask wraps under `SlipThrough`.
pub type MaskRect = SmallVec<[Rect; 4]>;

/// Splits the span `[start, start + scale)` along an axis of length `len`
/// into in-window `(start, len)` intervals, wrapping modulo `len`.
fn axis_intervals(start: i64, scale: u32, len: u32) -> SmallVec<[(u32, u32); 2]> {
    let len_i = len as i64;
    let s = start.rem_euclid(len_i);
    let end = s + scale as i64;
    let mut out = SmallVec::new();
    if end <= len_i {
        out.push((s as u32, scale));
    } else {
        out.push((s as u32, (len_i - s) as u32));
        out.push((0, (end - len_i) as u32));
    }
    out
}

pub fn mask_rect(state: &MaskState, spec: &MaskSpec, window: WindowSpec) -> MaskRect {
    let top = state.center_row as i64 - (spec.scale_h / 2) as i64;
    let left = state.center_col as i64 - (spec.scale_w / 2) as i64;
    let rows = axis_intervals(top, spec.scale_h, window.height);
    let cols = axis_intervals(left, spec.scale_w, window.width);
    let mut out = MaskRect::new();
    for &(top, height) in &rows {
        for &(left, width) in &cols {
            out.push(Rect {
                top,
                left,
                height,
                width,
            });
        }
    }
    out
}

pub fn init_mask<R: Rng + ?Sized>(
    spec: &MaskSpec,
    window: WindowSpec,
    rng: &mut R,
) -> Result<MaskState> {
    if spec.scale_h > window.height || spec.scale_w > window.width {
        return Err(Error::NoValidPlacement {
            spec: *spec,
            window,
        });
    }
    match spec.init {
        InitMode::Center => Ok(MaskState::new(window.height / 2, window.width / 2)),
        InitMode::Random => {
            let (rlo, rhi) = containing_centers(spec.scale_h, window.height);
            let (clo, chi) = containing_centers(spec.scale_w, window.width);
            let row = rng.random_range(rlo..=rhi);
            let col = rng.random_range(clo..=chi);
            Ok(MaskState::new(row, col))
        }
    }
}

/// Moves a mask one agent step. Stopping clamps each axis independently.
pub fn step_mask(
    state: &MaskState,
    dir: Direction,
    spec: &MaskSpec,
    window: WindowSpec,
) -> MaskState {
    if dir == Direction::Stay {
        return *state;
    }
    let (dr, dc) = dir.displacement(spec.speed);
    MaskState::placed_at(
        state.center_row as i64 + dr,
        state.center_col as i64 + dc,
        spec,
        window,
    )
}

/// Per-pixel observability over the window, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VisibilityMap {
    height: u32,
    width: u32,
    bits: Vec<bool>,
}

impl VisibilityMap {
    pub fn empty(window: WindowSpec) -> Self {
        Self {
            height: window.height,
            width: window.width,
            bits: vec![false; window.area()],
        }
    }

    pub fn full(window: WindowSpec) -> Self {
        Self {
            height: window.height,
            width: window.width,
            bits: vec![true; window.area()],
        }
    }

    pub fn from_bits(window: WindowSpec, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != window.area() {
            return Err(Error::DimensionMismatch {
                expected: (window.height, window.width),
                found: (bits.len() as u32, 1),
            });
        }
        Ok(Self {
            height: window.height,
            width: window.width,
            bits,
        })
    }

    pub fn window(&self) -> WindowSpec {
        WindowSpec {
            height: self.height,
            width: self.width,
        }
    }

    pub fn get(&self, row: u32, col: u32) -> bool {
        self.bits[(row * self.width + col) as usize]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn fill_rect(&mut self, rect: &Rect) {
        let w = self.width as usize;
        for r in rect.top..rect.top + rect.height {
            let base = r as usize * w;
            self.bits[base + rect.left as usize..base + (rect.left + rect.width) as usize]
                .fill(true);
        }
    }

    /// Pointwise OR with another map of the same window.
    pub fn union_with(&mut self, other: &VisibilityMap) {
        debug_assert_eq!(self.bits.len(), other.bits.len());
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }
}

/// Union of all mask rectangles.
pub fn visibility_map(masks: &[(MaskSpec, MaskState)], window: WindowSpec) -> VisibilityMap {
    let mut map = VisibilityMap::empty(window);
    for (spec, state) in masks {
        for rect in mask_rect(state, spec, window) {
            map.fill_rect(&rect);
        }
    }
    map
}
