//! Clip metadata: the input material set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::draft::TimeMs;

pub const MIN_NATIVE_FPS: f64 = 1.0;
pub const MAX_NATIVE_FPS: f64 = 240.0;

#[derive(Debug, Error, PartialEq)]
pub enum ClipError {
    #[error("clip {index}: duration must be positive and finite, got {duration_s}")]
    BadDuration { index: u32, duration_s: f64 },
    #[error("clip {index}: frame count must be at least 1")]
    NoFrames { index: u32 },
    #[error("clip {index}: native fps {fps} outside [1, 240]")]
    NativeFps { index: u32, fps: f64 },
    #[error("duplicate clip index {0}")]
    DuplicateIndex(u32),
    #[error("clip set JSON: {0}")]
    Json(String),
}

/// One clip: index, duration in seconds, and total frame count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipMeta {
    pub index: u32,
    pub duration_s: f64,
    pub frame_count: u32,
}

impl ClipMeta {
    pub fn new(index: u32, duration_s: f64, frame_count: u32) -> Result<Self, ClipError> {
        let clip = Self {
            index,
            duration_s,
            frame_count,
        };
        clip.check()?;
        Ok(clip)
    }

    /// Builds a clip from a millisecond span at a source frame rate. The
    /// frame count is the number of whole source frames inside the span.
    pub fn from_span(index: u32, span_ms: u64, source_fps: f64) -> Result<Self, ClipError> {
        let duration_s = span_ms as f64 / 1000.0;
        let frames = ((span_ms as f64 * source_fps / 1000.0).floor() as u32).max(1);
        Self::new(index, duration_s, frames)
    }

    pub fn check(&self) -> Result<(), ClipError> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(ClipError::BadDuration {
                index: self.index,
                duration_s: self.duration_s,
            });
        }
        if self.frame_count == 0 {
            return Err(ClipError::NoFrames { index: self.index });
        }
        let fps = self.native_fps();
        if !(MIN_NATIVE_FPS..=MAX_NATIVE_FPS).contains(&fps) {
            return Err(ClipError::NativeFps { index: self.index, fps });
        }
        Ok(())
    }

    pub fn native_fps(&self) -> f64 {
        self.frame_count as f64 / self.duration_s
    }

    /// Duration rounded to whole milliseconds.
    pub fn duration_ms(&self) -> TimeMs {
        TimeMs((self.duration_s * 1000.0).round() as u64)
    }
}

/// The clip set presented to the model, unique by index.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ClipSet {
    clips: Vec<ClipMeta>,
}

impl ClipSet {
    pub fn new(clips: Vec<ClipMeta>) -> Result<Self, ClipError> {
        let mut seen = std::collections::HashSet::new();
        for clip in &clips {
            clip.check()?;
            if !seen.insert(clip.index) {
                return Err(ClipError::DuplicateIndex(clip.index));
            }
        }
        Ok(Self { clips })
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ClipError> {
        let clips: Vec<ClipMeta> = serde_json::from_slice(bytes).map_err(|e| ClipError::Json(e.to_string()))?;
        Self::new(clips)
    }

    pub fn get(&self, index: u32) -> Option<&ClipMeta> {
        self.clips.iter().find(|c| c.index == index)
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ClipMeta> {
        self.clips.iter()
    }

    pub fn as_slice(&self) -> &[ClipMeta] {
        &self.clips
    }
}

impl<'de> Deserialize<'de> for ClipSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let clips = Vec::<ClipMeta>::deserialize(d)?;
        ClipSet::new(clips).map_err(serde::de::Error::custom)
    }
}

impl<'a> IntoIterator for &'a ClipSet {
    type Item = &'a ClipMeta;
    type IntoIter = std::slice::Iter<'a, ClipMeta>;

    fn into_iter(self) -> Self::IntoIter {
        self.clips.iter()
    }
}
