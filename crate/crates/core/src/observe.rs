//! Frame preprocessing, one-third occlusion masks and the 4-frame history.

use std::fmt;
use std::str::FromStr;

use crate::env::RawFrame;

pub const FRAME_SIZE: usize = 84;
pub const FRAME_PIXELS: usize = FRAME_SIZE * FRAME_SIZE;
pub const STACK_DEPTH: usize = 4;
const BAND: usize = FRAME_SIZE / 3;

/// A preprocessed 84×84 observation, row-major, values in `[0, 1]`.
#[derive(Clone, PartialEq)]
pub struct Frame84(Box<[f32]>);

impl Frame84 {
    pub fn zeros() -> Self {
        Self(vec![0.0; FRAME_PIXELS].into_boxed_slice())
    }

    pub fn filled(value: f32) -> Self {
        Self(vec![value; FRAME_PIXELS].into_boxed_slice())
    }

    /// Panics unless `pixels` has exactly 7056 entries.
    pub fn from_pixels(pixels: Vec<f32>) -> Self {
        assert_eq!(pixels.len(), FRAME_PIXELS, "Frame84 needs 84x84 pixels");
        Self(pixels.into_boxed_slice())
    }

    pub fn pixels(&self) -> &[f32] {
        &self.0
    }

    pub fn pixels_mut(&mut self) -> &mut [f32] {
        &mut self.0
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.0[row * FRAME_SIZE + col]
    }
}

impl fmt::Debug for Frame84 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lit = self.0.iter().filter(|&&p| p != 0.0).count();
        write!(f, "Frame84 {{ nonzero: {lit} }}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskFamily {
    Horizontal,
    Vertical,
}

impl MaskFamily {
    pub fn label(self) -> &'static str {
        match self {
            MaskFamily::Horizontal => "horizontal",
            MaskFamily::Vertical => "vertical",
        }
    }

    /// The three selectable masks; position in the array is the mask action index.
    pub fn masks(self) -> [MaskId; 3] {
        family_masks(self)
    }
}

impl FromStr for MaskFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "horizontal" => Ok(MaskFamily::Horizontal),
            "vertical" => Ok(MaskFamily::Vertical),
            other => Err(format!("expected `horizontal` or `vertical`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskId {
    HTop,
    HMid,
    HBot,
    VLeft,
    VMid,
    VRight,
    Identity,
}

impl MaskId {
    pub fn label(self) -> &'static str {
        match self {
            MaskId::HTop => "HTop",
            MaskId::HMid => "HMid",
            MaskId::HBot => "HBot",
            MaskId::VLeft => "VLeft",
            MaskId::VMid => "VMid",
            MaskId::VRight => "VRight",
            MaskId::Identity => "Identity",
        }
    }

    /// Visible `(rows, cols)` ranges.
    fn visible(self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let all = 0..FRAME_SIZE;
        let band = |i: usize| i * BAND..(i + 1) * BAND;
        match self {
            MaskId::HTop => (band(0), all),
            MaskId::HMid => (band(1), all),
            MaskId::HBot => (band(2), all),
            MaskId::VLeft => (all, band(0)),
            MaskId::VMid => (all, band(1)),
            MaskId::VRight => (all, band(2)),
            MaskId::Identity => (all.clone(), all),
        }
    }
}

pub fn family_masks(family: MaskFamily) -> [MaskId; 3] {
    match family {
        MaskFamily::Horizontal => [MaskId::HTop, MaskId::HMid, MaskId::HBot],
        MaskFamily::Vertical => [MaskId::VLeft, MaskId::VMid, MaskId::VRight],
    }
}

/// Area-average resampling of a raw frame to 84×84.
///
/// Each output pixel is the mean of the source region it covers, with
/// partially covered source pixels weighted by their overlap.
pub fn preprocess(raw: &RawFrame) -> Frame84 {
    assert!(raw.width > 0 && raw.height > 0, "raw frame must be non-empty");
    let cols = area_weights(raw.width, FRAME_SIZE);
    let rows = area_weights(raw.height, FRAME_SIZE);

    // Horizontal pass: height × 84.
    let mut tmp = vec![0.0f64; raw.height * FRAME_SIZE];
    for y in 0..raw.height {
        let src = &raw.pixels[y * raw.width..(y + 1) * raw.width];
        for (ox, taps) in cols.iter().enumerate() {
            tmp[y * FRAME_SIZE + ox] = taps.iter().map(|&(i, w)| w * src[i] as f64).sum();
        }
    }
    let mut out = Frame84::zeros();
    for (oy, taps) in rows.iter().enumerate() {
        for ox in 0..FRAME_SIZE {
            let v: f64 = taps.iter().map(|&(i, w)| w * tmp[i * FRAME_SIZE + ox]).sum();
            out.0[oy * FRAME_SIZE + ox] = (v as f32).clamp(0.0, 1.0);
        }
    }
    out
}

/// For each output cell, the `(source index, weight)` pairs; weights sum to one.
fn area_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let mut taps: Vec<(usize, f64)> = (lo.floor() as usize..(hi.ceil() as usize).min(src))
                .filter_map(|i| {
                    let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                    (overlap > 0.0).then_some((i, overlap))
                })
                .collect();
            let total: f64 = taps.iter().map(|t| t.1).sum();
            for t in &mut taps {
                t.1 /= total;
            }
            taps
        })
        .collect()
}

/// Zeroes everything outside the mask's visible band.
pub fn apply_mask(frame: &Frame84, mask: MaskId) -> Frame84 {
    let mut out = frame.clone();
    apply_mask_in_place(&mut out, mask);
    out
}

pub fn apply_mask_in_place(frame: &mut Frame84, mask: MaskId) {
    if mask == MaskId::Identity {
        return;
    }
    let (rows, cols) = mask.visible();
    for r in 0..FRAME_SIZE {
        let row = &mut frame.0[r * FRAME_SIZE..(r + 1) * FRAME_SIZE];
        if rows.contains(&r) {
            row[..cols.start].fill(0.0);
            row[cols.end..].fill(0.0);
        } else {
            row.fill(0.0);
        }
    }
}

/// The last four (already masked) frames, oldest first, with the mask each
/// frame was captured under.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsStack {
    frames: [Frame84; STACK_DEPTH],
    provenance: [MaskId; STACK_DEPTH],
}

impl Default for ObsStack {
    fn default() -> Self {
        Self::zeros()
    }
}

impl ObsStack {
    pub fn zeros() -> Self {
        Self {
            frames: std::array::from_fn(|_| Frame84::zeros()),
            provenance: [MaskId::Identity; STACK_DEPTH],
        }
    }

    /// A stack holding `frame` in every slot, as at the start of an episode.
    pub fn filled(frame: Frame84, mask: MaskId) -> Self {
        Self {
            frames: std::array::from_fn(|_| frame.clone()),
            provenance: [mask; STACK_DEPTH],
        }
    }

    pub fn from_parts(frames: [Frame84; STACK_DEPTH], provenance: [MaskId; STACK_DEPTH]) -> Self {
        Self { frames, provenance }
    }

    pub fn push(&mut self, frame: Frame84, mask: MaskId) {
        self.frames.rotate_left(1);
        self.provenance.rotate_left(1);
        self.frames[STACK_DEPTH - 1] = frame;
        self.provenance[STACK_DEPTH - 1] = mask;
    }

    /// Functional form of [`ObsStack::push`].
    pub fn pushed(&self, frame: Frame84, mask: MaskId) -> Self {
        let mut next = self.clone();
        next.push(frame, mask);
        next
    }

    pub fn frames(&self) -> &[Frame84; STACK_DEPTH] {
        &self.frames
    }

    pub fn provenance(&self) -> &[MaskId; STACK_DEPTH] {
        &self.provenance
    }

    pub fn newest(&self) -> &Frame84 {
        &self.frames[STACK_DEPTH - 1]
    }

    /// Writes the stack as a `4×84×84` channel-major block.
    pub fn write_into(&self, out: &mut [f32]) {
        assert_eq!(out.len(), STACK_DEPTH * FRAME_PIXELS);
        for (chunk, frame) in out.chunks_exact_mut(FRAME_PIXELS).zip(&self.frames) {
            chunk.copy_from_slice(frame.pixels());
        }
    }
}
