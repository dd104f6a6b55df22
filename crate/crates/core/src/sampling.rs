//! Slow-fast frame sampling and visual token budgets.
//!
//! Each clip is sampled twice: a fast pathway (dense frames, few tokens per
//! frame) and a slow pathway (sparse frames, many tokens per frame). A clip
//! shorter than one sampling interval contributes its middle frame; otherwise
//! `round(t·f)` frames are taken at a uniform stride of `L/n` source frames.
//! With `fast.fps · fast.k = slow.fps · slow.k` both pathways spend the same
//! `f·k·t` tokens per clip, up to one frame of rounding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clips::{ClipMeta, ClipSet};

pub const DEFAULT_FRAME_CEILING: usize = 600;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("invalid sampling config: {0}")]
    InvalidConfig(String),
    #[error("bad preset `{input}`: {reason}")]
    BadPreset { input: String, reason: String },
    #[error("clip set is empty")]
    EmptyClipSet,
    #[error("{clip_count} clips exceed the {ceiling}-frame ceiling even at one frame per clip")]
    CeilingUnsatisfiable { clip_count: usize, ceiling: usize },
}

/// Frame rate and tokens per frame for one pathway.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathwayConfig {
    pub fps: f64,
    pub tokens_per_frame: u32,
}

impl PathwayConfig {
    pub fn new(fps: f64, tokens_per_frame: u32) -> Self {
        Self { fps, tokens_per_frame }
    }

    fn check(&self, name: &str) -> Result<(), SamplingError> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(SamplingError::InvalidConfig(format!(
                "{name} fps must be positive, got {}",
                self.fps
            )));
        }
        if self.tokens_per_frame == 0 {
            return Err(SamplingError::InvalidConfig(format!(
                "{name} tokens_per_frame must be >= 1"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for PathwayConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.fps, self.tokens_per_frame)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowFastConfig {
    pub fast: PathwayConfig,
    pub slow: PathwayConfig,
    pub frame_ceiling: usize,
}

impl SlowFastConfig {
    pub fn new(fast: PathwayConfig, slow: PathwayConfig) -> Result<Self, SamplingError> {
        let cfg = Self {
            fast,
            slow,
            frame_ceiling: DEFAULT_FRAME_CEILING,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn with_ceiling(mut self, frame_ceiling: usize) -> Result<Self, SamplingError> {
        self.frame_ceiling = frame_ceiling;
        self.check()?;
        Ok(self)
    }

    /// fast 2 fps × 4 tokens, slow 0.5 fps × 16 tokens.
    pub fn preset_fast2_slow05() -> Self {
        Self::new(PathwayConfig::new(2.0, 4), PathwayConfig::new(0.5, 16)).expect("valid preset")
    }

    /// fast 2 fps × 4 tokens, slow 0.125 fps × 64 tokens.
    pub fn preset_fast2_slow0125() -> Self {
        Self::new(PathwayConfig::new(2.0, 4), PathwayConfig::new(0.125, 64)).expect("valid preset")
    }

    pub fn check(&self) -> Result<(), SamplingError> {
        self.fast.check("fast")?;
        self.slow.check("slow")?;
        if self.fast.fps < self.slow.fps {
            return Err(SamplingError::InvalidConfig(format!(
                "fast fps {} below slow fps {}",
                self.fast.fps, self.slow.fps
            )));
        }
        if self.fast.tokens_per_frame > self.slow.tokens_per_frame {
            return Err(SamplingError::InvalidConfig(format!(
                "fast tokens/frame {} above slow tokens/frame {}",
                self.fast.tokens_per_frame, self.slow.tokens_per_frame
            )));
        }
        if self.frame_ceiling == 0 {
            return Err(SamplingError::InvalidConfig("frame ceiling must be >= 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for SlowFastConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fast:{} slow:{}", self.fast, self.slow)
    }
}

/// Parses the `fps/tokens` notation, e.g. `fast:2/4 slow:0.125/64`
/// (pathways separated by whitespace or a comma, either order).
impl FromStr for SlowFastConfig {
    type Err = SamplingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| SamplingError::BadPreset {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let mut fast = None;
        let mut slow = None;
        for part in s
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
        {
            let (name, spec) = part
                .split_once(':')
                .ok_or_else(|| bad("expected `fast:` or `slow:` prefix"))?;
            let (fps, tokens) = spec.split_once('/').ok_or_else(|| bad("expected fps/tokens"))?;
            let fps: f64 = fps.parse().map_err(|_| bad("fps is not a number"))?;
            let tokens: u32 = tokens.parse().map_err(|_| bad("tokens is not a positive integer"))?;
            let slot = match name {
                "fast" => &mut fast,
                "slow" => &mut slow,
                _ => return Err(bad("unknown pathway name")),
            };
            if slot.replace(PathwayConfig::new(fps, tokens)).is_some() {
                return Err(bad("pathway given twice"));
            }
        }
        let fast = fast.ok_or_else(|| bad("missing fast pathway"))?;
        let slow = slow.ok_or_else(|| bad("missing slow pathway"))?;
        SlowFastConfig::new(fast, slow).map_err(|e| bad(&e.to_string()))
    }
}

/// Frames sampled on one pathway for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwaySample {
    pub fps: f64,
    pub tokens_per_frame: u32,
    pub frame_indices: Vec<u32>,
    pub timestamps: Vec<f64>,
    pub tokens: u64,
}

impl PathwaySample {
    pub fn frame_count(&self) -> usize {
        self.frame_indices.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipPlan {
    pub index: u32,
    pub duration_s: f64,
    pub fast: PathwaySample,
    pub slow: PathwaySample,
}

impl ClipPlan {
    pub fn e_fast(&self) -> u64 {
        self.fast.tokens
    }

    pub fn e_slow(&self) -> u64 {
        self.slow.tokens
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub clips: Vec<ClipPlan>,
    pub effective_fast_fps: f64,
    /// Power of two the fast fps was divided by to meet the frame ceiling.
    pub reduction_factor: u64,
    pub frame_ceiling: usize,
    pub total_fast_frames: usize,
    pub total_slow_frames: usize,
    pub total_fast_tokens: u64,
    pub total_slow_tokens: u64,
}

impl SamplingPlan {
    pub fn clip(&self, index: u32) -> Option<&ClipPlan> {
        self.clips.iter().find(|c| c.index == index)
    }

    pub fn to_canonical_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("plan serializes")
    }
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Number of frames `sample_frames` returns, without allocating.
pub fn frame_count(clip: &ClipMeta, fps: f64) -> usize {
    if clip.duration_s < 1.0 / fps {
        1
    } else {
        // capped at L so indices stay strictly increasing
        (round_half_up(clip.duration_s * fps).max(1.0) as usize).min(clip.frame_count as usize)
    }
}

/// Source frame indices sampled from `clip` at `fps`.
pub fn sample_frames(clip: &ClipMeta, fps: f64) -> Vec<u32> {
    let total = clip.frame_count as u64;
    if clip.duration_s < 1.0 / fps {
        return vec![(total / 2) as u32];
    }
    let n = frame_count(clip, fps) as u64;
    (0..n).map(|j| (j * total / n) as u32).collect()
}

fn sample_pathway(clip: &ClipMeta, fps: f64, tokens_per_frame: u32) -> PathwaySample {
    let frame_indices = sample_frames(clip, fps);
    let spf = clip.duration_s / clip.frame_count as f64;
    let timestamps = frame_indices.iter().map(|&i| i as f64 * spf).collect();
    let tokens = tokens_per_frame as u64 * frame_indices.len() as u64;
    PathwaySample {
        fps,
        tokens_per_frame,
        frame_indices,
        timestamps,
        tokens,
    }
}

pub fn plan_clip(clip: &ClipMeta, cfg: &SlowFastConfig) -> ClipPlan {
    plan_clip_at(clip, cfg, cfg.fast.fps)
}

fn plan_clip_at(clip: &ClipMeta, cfg: &SlowFastConfig, fast_fps: f64) -> ClipPlan {
    ClipPlan {
        index: clip.index,
        duration_s: clip.duration_s,
        fast: sample_pathway(clip, fast_fps, cfg.fast.tokens_per_frame),
        slow: sample_pathway(clip, cfg.slow.fps, cfg.slow.tokens_per_frame),
    }
}

/// Plans every clip of a request, halving the fast fps until the total fast
/// frame count fits under the ceiling. Clips are never dropped.
pub fn plan_request(clips: &ClipSet, cfg: &SlowFastConfig) -> Result<SamplingPlan, SamplingError> {
    cfg.check()?;
    if clips.is_empty() {
        return Err(SamplingError::EmptyClipSet);
    }
    if clips.len() > cfg.frame_ceiling {
        return Err(SamplingError::CeilingUnsatisfiable {
            clip_count: clips.len(),
            ceiling: cfg.frame_ceiling,
        });
    }
    let mut reduction_factor: u64 = 1;
    let mut fast_fps = cfg.fast.fps;
    while clips.iter().map(|c| frame_count(c, fast_fps)).sum::<usize>() > cfg.frame_ceiling {
        // terminates: once 1/fps exceeds every duration each clip yields one frame
        reduction_factor *= 2;
        fast_fps = cfg.fast.fps / reduction_factor as f64;
    }
    let plans: Vec<ClipPlan> = clips.iter().map(|c| plan_clip_at(c, cfg, fast_fps)).collect();
    Ok(SamplingPlan {
        total_fast_frames: plans.iter().map(|p| p.fast.frame_count()).sum(),
        total_slow_frames: plans.iter().map(|p| p.slow.frame_count()).sum(),
        total_fast_tokens: plans.iter().map(|p| p.fast.tokens).sum(),
        total_slow_tokens: plans.iter().map(|p| p.slow.tokens).sum(),
        clips: plans,
        effective_fast_fps: fast_fps,
        reduction_factor,
        frame_ceiling: cfg.frame_ceiling,
    })
}
