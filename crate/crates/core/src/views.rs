//! Long/short temporal views of a clip.
//!
//! The long view samples the whole clip; the short view samples a contiguous
//! segment covering a fixed fraction of it. Both keep frame order.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Frames, VideoClip};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// One random index per equal-width bin (training).
    RandomSparse,
    /// The centre of each bin (inference).
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewConfig {
    pub frames_per_view: usize,
    pub short_view_fraction: f64,
    pub sampling_mode: SamplingMode,
}

impl Default for ViewConfig {
    fn default() -> Self {
        ViewConfig {
            frames_per_view: 8,
            short_view_fraction: 0.125,
            sampling_mode: SamplingMode::RandomSparse,
        }
    }
}

impl ViewConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames_per_view < 1 {
            return Err(Error::config("frames_per_view", "must be at least 1"));
        }
        if !(self.short_view_fraction > 0.0 && self.short_view_fraction <= 1.0) {
            return Err(Error::config("short_view_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewPair {
    pub long_frames: Frames,
    pub short_frames: Frames,
    pub segment_start: usize,
    pub segment_end: usize,
    pub long_indices: Vec<usize>,
    pub short_indices: Vec<usize>,
}

/// Length of the short-view segment, `round(fraction * t_raw)`.
pub fn short_segment_len(t_raw: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config("short_view_fraction", "must lie in (0, 1]"));
    }
    let len = (fraction * t_raw as f64).round() as usize;
    if len < 1 {
        return Err(Error::config(
            "short_view_fraction",
            format!("segment of {fraction} x {t_raw} frames is empty"),
        ));
    }
    Ok(len.min(t_raw))
}

/// Picks a contiguous short-view segment with a uniformly random start.
pub fn truncate_short_view(t_raw: usize, fraction: f64, rng: &mut Rng) -> Result<(usize, usize)> {
    let len = short_segment_len(t_raw, fraction)?;
    let start = rng.gen_range(0..=t_raw - len);
    Ok((start, start + len))
}

/// Samples `count` frame indices from `range` in non-decreasing order.
///
/// The range is split into `count` equal bins. Ranges shorter than `count`
/// repeat boundary indices instead of drawing.
pub fn sample_frames(range: std::ops::Range<usize>, count: usize, rng: &mut Rng, mode: SamplingMode) -> Vec<usize> {
    let len = range.end.saturating_sub(range.start);
    assert!(count >= 1 && len >= 1, "empty frame range or count");
    let edge = |i: usize| range.start + i * len / count;
    if len < count {
        return (0..count).map(edge).collect();
    }
    (0..count)
        .map(|i| match mode {
            SamplingMode::Uniform => range.start + ((2 * i + 1) * len) / (2 * count),
            SamplingMode::RandomSparse => rng.gen_range(edge(i)..edge(i + 1)),
        })
        .collect()
}

/// Builds the long and short views of `clip`.
///
/// Draw order is fixed: long-view indices, then the segment, then short-view indices.
pub fn make_view_pair(clip: &VideoClip, config: &ViewConfig, rng: &mut Rng) -> Result<ViewPair> {
    config.validate()?;
    let t_raw = clip.num_frames();
    let t_s = config.frames_per_view;
    let long_indices = sample_frames(0..t_raw, t_s, rng, config.sampling_mode);
    let (segment_start, segment_end) = truncate_short_view(t_raw, config.short_view_fraction, rng)?;
    let short_indices = sample_frames(segment_start..segment_end, t_s, rng, config.sampling_mode);
    Ok(ViewPair {
        long_frames: clip.frames.select(&long_indices),
        short_frames: clip.frames.select(&short_indices),
        segment_start,
        segment_end,
        long_indices,
        short_indices,
    })
}

/// Inference-time long view: uniform sampling over the whole clip.
pub fn uniform_long_view(clip: &VideoClip, frames_per_view: usize) -> Frames {
    let mut unused = crate::rng::rng_from(0);
    let idx = sample_frames(
        0..clip.num_frames(),
        frames_per_view,
        &mut unused,
        SamplingMode::Uniform,
    );
    clip.frames.select(&idx)
}
