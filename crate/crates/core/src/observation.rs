//! Frame preprocessing: grayscale, masking or foveated decay at native
//! resolution, area downscaling to 84x84, and 4-frame stacking.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{mask_rect, MaskSpec, MaskState, VisibilityMap, WindowSpec};

pub const OBS_SIZE: u32 = 84;
pub const STACK_DEPTH: usize = 4;

/// Rounded quotient `num / den` with halves rounded away from zero.
#[inline]
pub(crate) fn div_round(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    height: u32,
    width: u32,
    pixels: Vec<[u8; 3]>,
}

impl RgbFrame {
    pub fn filled(window: WindowSpec, rgb: [u8; 3]) -> Self {
        Self {
            height: window.height,
            width: window.width,
            pixels: vec![rgb; window.area()],
        }
    }

    pub fn from_pixels(window: WindowSpec, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != window.area() {
            return Err(Error::DimensionMismatch {
                expected: (window.height, window.width),
                found: (pixels.len() as u32, 1),
            });
        }
        Ok(Self {
            height: window.height,
            width: window.width,
            pixels,
        })
    }

    pub fn window(&self) -> WindowSpec {
        WindowSpec {
            height: self.height,
            width: self.width,
        }
    }

    pub fn get(&self, row: u32, col: u32) -> [u8; 3] {
        self.pixels[(row * self.width + col) as usize]
    }

    pub fn set(&mut self, row: u32, col: u32, rgb: [u8; 3]) {
        self.pixels[(row * self.width + col) as usize] = rgb;
    }

    /// Fills the part of the rectangle that lies inside the frame.
    pub fn fill_rect(&mut self, top: i64, left: i64, height: u32, width: u32, rgb: [u8; 3]) {
        let r0 = top.max(0);
        let r1 = (top + height as i64).min(self.height as i64);
        let c0 = left.max(0);
        let c1 = (left + width as i64).min(self.width as i64);
        if r0 >= r1 || c0 >= c1 {
            return;
        }
        let w = self.width as usize;
        for r in r0 as usize..r1 as usize {
            self.pixels[r * w + c0 as usize..r * w + c1 as usize].fill(rgb);
        }
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayFrame {
    height: u32,
    width: u32,
    pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn filled(height: u32, width: u32, value: u8) -> Self {
        Self {
            height,
            width,
            pixels: vec![value; height as usize * width as usize],
        }
    }

    pub fn from_pixels(height: u32, width: u32, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != height as usize * width as usize {
            return Err(Error::DimensionMismatch {
                expected: (height, width),
                found: (pixels.len() as u32, 1),
            });
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn window(&self) -> WindowSpec {
        WindowSpec {
            height: self.height,
            width: self.width,
        }
    }

    pub fn get(&self, row: u32, col: u32) -> u8 {
        self.pixels[(row * self.width + col) as usize]
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Writes a binary portable graymap (P5).
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.pixels)
    }

    pub fn read_pgm<R: BufRead>(mut input: R) -> Result<Self> {
        let mut tokens = Vec::with_capacity(4);
        let mut line = String::new();
        while tokens.len() < 4 {
            line.clear();
            if input.read_line(&mut line)? == 0 {
                return Err(Error::Malformed("truncated PGM header".into()));
            }
            let content = line.split('#').next().unwrap_or("");
            tokens.extend(content.split_whitespace().map(str::to_owned));
        }
        if tokens[0] != "P5" || tokens[3] != "255" {
            return Err(Error::Malformed("expected an 8-bit P5 graymap".into()));
        }
        let parse = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| Error::Malformed(format!("bad PGM dimension `{s}`")))
        };
        let (width, height) = (parse(&tokens[1])?, parse(&tokens[2])?);
        let mut pixels = vec![0u8; height as usize * width as usize];
        input.read_exact(&mut pixels)?;
        Self::from_pixels(height, width, pixels)
    }
}

/// ITU-R BT.601 luma, computed in integer arithmetic.
pub fn to_grayscale(frame: &RgbFrame) -> GrayFrame {
    let pixels = frame
        .pixels
        .iter()
        .map(|&[r, g, b]| {
            let weighted = 299 * r as u64 + 587 * g as u64 + 114 * b as u64;
            div_round(weighted, 1000).min(255) as u8
        })
        .collect();
    GrayFrame {
        height: frame.height,
        width: frame.width,
        pixels,
    }
}

fn check_dims(frame: &GrayFrame, window: WindowSpec) -> Result<()> {
    if frame.window() != window {
        return Err(Error::DimensionMismatch {
            expected: (window.height, window.width),
            found: (frame.height, frame.width),
        });
    }
    Ok(())
}

pub fn apply_hard_mask(frame: &GrayFrame, vis: &VisibilityMap, fill: u8) -> Result<GrayFrame> {
    check_dims(frame, vis.window())?;
    let pixels = frame
        .pixels
        .iter()
        .zip(vis.bits())
        .map(|(&p, &visible)| if visible { p } else { fill })
        .collect();
    Ok(GrayFrame {
        height: frame.height,
        width: frame.width,
        pixels,
    })
}

/// Three-layer foveation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecaySpec {
    pub enabled: bool,
    /// Size of the middle layer relative to the mask.
    pub middle_scale_factor: f64,
    /// Resolution fraction of the (mask, middle, outer) layers.
    pub resolutions: [f64; 3],
}

impl Default for DecaySpec {
    fn default() -> Self {
        Self {
            enabled: false,
            middle_scale_factor: 1.5,
            resolutions: [1.0, 0.5, 0.25],
        }
    }
}

impl DecaySpec {
    pub fn enabled() -> Self {
        Self {
            enabled: true,
            ..Self::default()
        }
    }

    /// Pixel block edge for the middle and outer layers.
    pub fn block_sizes(&self) -> Result<(u32, u32)> {
        let [r1, r2, r3] = self.resolutions;
        if !(r1 <= 1.0 && r1 > r2 && r2 > r3 && r3 > 0.0) {
            return Err(Error::InvalidDecay(format!(
                "resolutions must satisfy 1 >= r1 > r2 > r3 > 0, got {:?}",
                self.resolutions
            )));
        }
        if r1 != 1.0 {
            return Err(Error::InvalidDecay(
                "mask layer must be full resolution".into(),
            ));
        }
        if self.middle_scale_factor.is_nan() || self.middle_scale_factor <= 1.0 {
            return Err(Error::InvalidDecay(format!(
                "middle scale factor must exceed 1, got {}",
                self.middle_scale_factor
            )));
        }
        let block = |r: f64| {
            let inv = (1.0 / r).round();
            if (inv * r - 1.0).abs() > 1e-9 {
                Err(Error::InvalidDecay(format!("1/{r} is not an integer")))
            } else {
                Ok(inv as u32)
            }
        };
        Ok((block(r2)?, block(r3)?))
    }

    pub fn validate(&self) -> Result<()> {
        self.block_sizes().map(|_| ())
    }
}

/// Layer index (0 = mask, 1 = middle, 2 = outer) for every pixel, row-major.
pub fn decay_layers(
    spec: &MaskSpec,
    state: &MaskState,
    window: WindowSpec,
    decay: &DecaySpec,
) -> Vec<u8> {
    let mut layers = vec![2u8; window.area()];
    let w = window.width as usize;

    // middle layer: scaled rectangle about the same center, clipped
    let mid_h = (spec.scale_h as f64 * decay.middle_scale_factor).round() as i64;
    let mid_w = (spec.scale_w as f64 * decay.middle_scale_factor).round() as i64;
    let top = state.center_row as i64 - mid_h / 2;
    let left = state.center_col as i64 - mid_w / 2;
    let r0 = top.max(0) as usize;
    let r1 = (top + mid_h).min(window.height as i64).max(0) as usize;
    let c0 = left.max(0) as usize;
    let c1 = (left + mid_w).min(window.width as i64).max(0) as usize;
    for r in r0..r1 {
        if c0 < c1 {
            layers[r * w + c0..r * w + c1].fill(1);
        }
    }

    for rect in mask_rect(state, spec, window) {
        for r in rect.top..rect.top + rect.height {
            let base = r as usize * w;
            layers[base + rect.left as usize..base + (rect.left + rect.width) as usize].fill(0);
        }
    }
    layers
}

/// Foveated rendering around a single mask: full resolution inside the mask,
/// block-averaged middle and outer layers. Blocks are anchored at the frame
/// origin and only average pixels of their own layer.
pub fn apply_resolution_decay(
    frame: &GrayFrame,
    masks: &[(MaskSpec, MaskState)],
    decay: &DecaySpec,
) -> Result<GrayFrame> {
    let [(spec, state)] = masks else {
        return Err(Error::DecayWithMultipleMasks(masks.len()));
    };
    let (mid_block, outer_block) = decay.block_sizes()?;
    let window = frame.window();
    let layers = decay_layers(spec, state, window, decay);
    let mut out = frame.pixels.clone();
    pixelate_layer(frame, &layers, 1, mid_block, &mut out);
    pixelate_layer(frame, &layers, 2, outer_block, &mut out);
    Ok(GrayFrame {
        height: frame.height,
        width: frame.width,
        pixels: out,
    })
}

fn pixelate_layer(frame: &GrayFrame, layers: &[u8], layer: u8, block: u32, out: &mut [u8]) {
    if block <= 1 {
        return;
    }
    let (h, w) = (frame.height as usize, frame.width as usize);
    let b = block as usize;
    for br in (0..h).step_by(b) {
        for bc in (0..w).step_by(b) {
            let rows = br..(br + b).min(h);
            let cols = bc..(bc + b).min(w);
            let mut sum = 0u64;
            let mut count = 0u64;
            for r in rows.clone() {
                for c in cols.clone() {
                    let i = r * w + c;
                    if layers[i] == layer {
                        sum += frame.pixels[i] as u64;
                        count += 1;
                    }
                }
            }
            if count == 0 {
                continue;
            }
            let mean = div_round(sum, count) as u8;
            for r in rows.clone() {
                for c in cols.clone() {
                    let i = r * w + c;
                    if layers[i] == layer {
                        out[i] = mean;
                    }
                }
            }
        }
    }
}

/// Overlap lengths between source cells and output cells along one axis.
/// Coordinates are scaled by `dst * src` so every boundary is an integer:
/// source cell `s` spans `[s*dst, (s+1)*dst)`, output cell `o` spans
/// `[o*src, (o+1)*src)`.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, u64)>> {
    (0..dst)
        .map(|o| {
            let lo = o * src;
            let hi = (o + 1) * src;
            (lo / dst..hi.div_ceil(dst))
                .filter_map(|s| {
                    let a = (s * dst).max(lo);
                    let b = ((s + 1) * dst).min(hi);
                    (b > a).then(|| (s, (b - a) as u64))
                })
                .collect()
        })
        .collect()
}

/// Area-weighted resize: every output pixel is the exact area-weighted mean
/// of the source pixels it covers, rounded half away from zero.
pub fn resize_area(frame: &GrayFrame, out_h: u32, out_w: u32) -> GrayFrame {
    let (h, w) = (frame.height as usize, frame.width as usize);
    let row_w = area_weights(h, out_h as usize);
    let col_w = area_weights(w, out_w as usize);
    let total = (h * w) as u64;
    let mut pixels = Vec::with_capacity(out_h as usize * out_w as usize);
    for rw in &row_w {
        for cw in &col_w {
            let mut acc = 0u64;
            for &(r, wr) in rw {
                let row = &frame.pixels[r * w..(r + 1) * w];
                for &(c, wc) in cw {
                    acc += wr * wc * row[c] as u64;
                }
            }
            pixels.push(div_round(acc, total) as u8);
        }
    }
    GrayFrame {
        height: out_h,
        width: out_w,
        pixels,
    }
}

pub fn downscale_84(frame: &GrayFrame) -> GrayFrame {
    resize_area(frame, OBS_SIZE, OBS_SIZE)
}

/// The agent observation: four 84x84 frames, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Observation {
    pub frames: [GrayFrame; STACK_DEPTH],
}

impl Observation {
    pub fn newest(&self) -> &GrayFrame {
        &self.frames[STACK_DEPTH - 1]
    }
}

/// Sliding history of processed frames.
#[derive(Debug, Clone, Default)]
pub struct FrameStack {
    frames: VecDeque<GrayFrame>,
}

impl FrameStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn push(&mut self, frame: GrayFrame) -> Observation {
        if self.frames.len() == STACK_DEPTH {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        self.observation().expect("stack is non-empty after push")
    }

    /// Current stack, padded at the old end by repeating the oldest frame.
    pub fn observation(&self) -> Option<Observation> {
        let oldest = self.frames.front()?;
        let pad = STACK_DEPTH - self.frames.len();
        let frames = std::array::from_fn(|i| {
            if i < pad {
                oldest.clone()
            } else {
                self.frames[i - pad].clone()
            }
        });
        Some(Observation { frames })
    }
}
