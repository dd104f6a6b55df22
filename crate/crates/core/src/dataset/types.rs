use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clips::ClipMeta;
use crate::draft::{DecorationSetting, Draft, TimeMs};

use super::DatasetError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductInfo {
    pub name: String,
    pub brand: String,
    /// Price including currency, e.g. "$19.99".
    pub price: String,
    pub selling_points: Vec<String>,
}

impl ProductInfo {
    pub fn check(&self) -> Result<(), DatasetError> {
        if self.name.trim().is_empty() {
            return Err(DatasetError::InvalidProduct("name is empty".into()));
        }
        if self.selling_points.iter().all(|p| p.trim().is_empty()) {
            return Err(DatasetError::InvalidProduct("no selling points".into()));
        }
        Ok(())
    }
}

/// The eight free-prompt dimensions, in rubric order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Duration,
    VisualStoryline,
    TargetAudience,
    ScriptRoutine,
    SellingPointsEmphasis,
    Avatar,
    TtsTimbre,
    MusicStyle,
}

impl Dimension {
    pub const ALL: [Dimension; 8] = [
        Dimension::Duration,
        Dimension::VisualStoryline,
        Dimension::TargetAudience,
        Dimension::ScriptRoutine,
        Dimension::SellingPointsEmphasis,
        Dimension::Avatar,
        Dimension::TtsTimbre,
        Dimension::MusicStyle,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Dimension::Duration => "duration",
            Dimension::VisualStoryline => "visual_storyline",
            Dimension::TargetAudience => "target_audience",
            Dimension::ScriptRoutine => "script_routine",
            Dimension::SellingPointsEmphasis => "selling_points_emphasis",
            Dimension::Avatar => "avatar",
            Dimension::TtsTimbre => "tts_timbre",
            Dimension::MusicStyle => "music_style",
        }
    }

    /// Heading used when rendering a prompt.
    pub fn label(self) -> &'static str {
        match self {
            Dimension::Duration => "Video duration",
            Dimension::VisualStoryline => "Visual storyline",
            Dimension::TargetAudience => "Target audience",
            Dimension::ScriptRoutine => "Script routine",
            Dimension::SellingPointsEmphasis => "Selling points to emphasize",
            Dimension::Avatar => "Avatar",
            Dimension::TtsTimbre => "Voice timbre",
            Dimension::MusicStyle => "Music style",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Dimension {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.key() == s)
            .ok_or_else(|| DatasetError::UnknownDimension(s.to_string()))
    }
}

/// Per-dimension analysis; `None` marks a dimension the source video does not
/// support.
pub type Analysis = BTreeMap<Dimension, Option<String>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreePrompt {
    pub dimensions: BTreeMap<Dimension, String>,
    pub text: String,
}

impl FreePrompt {
    /// Builds a prompt from retained dimensions, rendering the text form.
    pub fn from_dimensions(dimensions: BTreeMap<Dimension, String>) -> Result<Self, DatasetError> {
        let text = render_prompt_text(&dimensions);
        let prompt = Self { dimensions, text };
        prompt.check()?;
        Ok(prompt)
    }

    pub fn check(&self) -> Result<(), DatasetError> {
        if self.dimensions.is_empty() {
            return Err(DatasetError::InvalidPrompt("no dimension present".into()));
        }
        if let Some((d, _)) = self.dimensions.iter().find(|(_, v)| v.trim().is_empty()) {
            return Err(DatasetError::InvalidPrompt(format!("dimension {d} is blank")));
        }
        if self.text.trim().is_empty() {
            return Err(DatasetError::InvalidPrompt("rendered text is empty".into()));
        }
        Ok(())
    }

    pub fn has(&self, d: Dimension) -> bool {
        self.dimensions.contains_key(&d)
    }
}

/// One line per retained dimension, `Label: value`, in dimension order.
pub fn render_prompt_text(dimensions: &BTreeMap<Dimension, String>) -> String {
    dimensions
        .iter()
        .map(|(d, v)| format!("{}: {}", d.label(), v.trim()))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsrSegment {
    pub text: String,
    pub start: TimeMs,
    pub end: TimeMs,
}

impl AsrSegment {
    pub fn new(text: impl Into<String>, start: u64, end: u64) -> Self {
        Self {
            text: text.into(),
            start: TimeMs(start),
            end: TimeMs(end),
        }
    }
}

/// A source video handed to the builder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoRef {
    pub video_id: String,
    pub uri: String,
    pub duration_ms: u64,
    pub native_fps: f64,
    pub product: ProductInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deconstruction {
    pub video_id: String,
    pub duration_ms: u64,
    pub native_fps: f64,
    pub asr_sentences: Vec<AsrSegment>,
    pub subtitle_ocr: Vec<String>,
    /// Strictly increasing, starting at 0 and ending at `duration_ms`.
    pub shot_boundaries: Vec<TimeMs>,
    /// One per shot.
    pub shot_captions: Vec<String>,
    pub recommended_tags: DecorationSetting,
    pub warnings: Vec<String>,
}

impl Deconstruction {
    pub fn shot_count(&self) -> usize {
        self.shot_boundaries.len().saturating_sub(1)
    }

    /// `(start, end)` of shot `k`.
    pub fn shot(&self, k: usize) -> (u64, u64) {
        (self.shot_boundaries[k].0, self.shot_boundaries[k + 1].0)
    }
}

/// Origin of a presented clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipSource {
    pub video_id: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub native_fps: f64,
}

impl ClipSource {
    pub fn span_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }
}

/// One instruction/draft pair.
///
/// Clips are identified two ways. Canonical ids put the positives first in
/// source order, then the negatives in draw order. Presentation slots are the
/// shuffled positions the model sees, and every draft index is a slot:
/// `clip_order[slot]` is the canonical id shown at `slot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSample {
    pub sample_id: u64,
    pub video_id: String,
    pub instruction: String,
    pub product: ProductInfo,
    pub free_prompt: FreePrompt,
    /// Clip metadata by slot; `clips[s].index == s`.
    pub clips: Vec<ClipMeta>,
    pub clip_sources: Vec<ClipSource>,
    pub clip_order: Vec<u32>,
    pub positive_count: u32,
    /// Slots holding negative clips, ascending.
    pub negatives: Vec<u32>,
    pub ground_truth: Draft,
    /// Set when fewer negatives were available than drawn.
    pub negative_cap: Option<NegativeCap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativeCap {
    pub drawn: u32,
    pub available: u32,
}
