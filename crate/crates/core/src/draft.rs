//! The three-track edit draft: voice-over sentences, video nodes, and
//! decoration tags.
//!
//! Parsing is strict about protocol shape: unknown top-level keys, missing
//! fields, mistyped fields and fractional times are errors carrying the JSON
//! path. Unknown keys inside track objects are tolerated and surfaced as
//! warnings. Serialization is canonical: fixed key order, compact, no
//! insignificant whitespace.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::clips::ClipSet;
use crate::report::ValidationReport;
use crate::taxonomy::{TagCategory, TagTaxonomy};

/// Integer milliseconds on a draft timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeMs(pub u64);

impl TimeMs {
    pub const ZERO: TimeMs = TimeMs(0);

    pub fn as_u64(self) -> u64 {
        self.0
    }
}

impl fmt::Display for TimeMs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VoiceSentence {
    pub text: String,
    pub target_start: TimeMs,
    pub target_end: TimeMs,
}

impl VoiceSentence {
    pub fn new(text: impl Into<String>, start: u64, end: u64) -> Self {
        Self {
            text: text.into(),
            target_start: TimeMs(start),
            target_end: TimeMs(end),
        }
    }

    pub fn span(&self) -> u64 {
        self.target_end.0.saturating_sub(self.target_start.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VideoNode {
    pub index: u32,
    pub target_start: TimeMs,
    pub target_end: TimeMs,
    pub source_start: TimeMs,
}

impl VideoNode {
    pub fn new(index: u32, start: u64, end: u64, source_start: u64) -> Self {
        Self {
            index,
            target_start: TimeMs(start),
            target_end: TimeMs(end),
            source_start: TimeMs(source_start),
        }
    }

    pub fn span(&self) -> u64 {
        self.target_end.0.saturating_sub(self.target_start.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecorationSetting {
    pub tts_tags: Vec<String>,
    pub avatar_tags: Vec<String>,
    pub music_tags: Vec<String>,
}

impl DecorationSetting {
    pub fn tags(&self, category: TagCategory) -> &[String] {
        match category {
            TagCategory::Tts => &self.tts_tags,
            TagCategory::Avatar => &self.avatar_tags,
            TagCategory::Music => &self.music_tags,
        }
    }

    pub fn tags_mut(&mut self, category: TagCategory) -> &mut Vec<String> {
        match category {
            TagCategory::Tts => &mut self.tts_tags,
            TagCategory::Avatar => &mut self.avatar_tags,
            TagCategory::Music => &mut self.music_tags,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Draft {
    pub voice_over_track: Vec<VoiceSentence>,
    pub video_nodes_track: Vec<VideoNode>,
    pub decoration_setting: DecorationSetting,
}

impl Draft {
    /// Clip indices in track order.
    pub fn clip_indices(&self) -> Vec<u32> {
        self.video_nodes_track.iter().map(|n| n.index).collect()
    }

    /// Voice-over script, sentences joined by a single space.
    pub fn script(&self) -> String {
        self.voice_over_track
            .iter()
            .map(|s| s.text.trim())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DraftError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("negative time {value} at `{path}`")]
    NegativeTime { path: String, value: i64 },
}

impl DraftError {
    pub fn path(&self) -> Option<&str> {
        match self {
            DraftError::Syntax { .. } => None,
            DraftError::Schema { path, .. } | DraftError::NegativeTime { path, .. } => Some(path),
        }
    }
}

/// Non-fatal parse finding (unknown key inside a track object).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub path: String,
    pub message: String,
}

const TOP_LEVEL_KEYS: [&str; 3] = ["voice_over_track", "video_nodes_track", "decoration_setting"];

pub fn parse_draft(bytes: &[u8]) -> Result<Draft, DraftError> {
    parse_draft_with_warnings(bytes).map(|(d, _)| d)
}

pub fn parse_draft_with_warnings(bytes: &[u8]) -> Result<(Draft, Vec<ParseWarning>), DraftError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| DraftError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    draft_from_value(&value)
}

/// Canonical bytes for a draft.
pub fn serialize_draft(draft: &Draft) -> Vec<u8> {
    serde_json::to_vec(draft).expect("draft serialization is infallible")
}

pub fn draft_from_value(value: &Value) -> Result<(Draft, Vec<ParseWarning>), DraftError> {
    let mut walker = Walker::default();
    let draft = walker.draft(value)?;
    Ok((draft, walker.warnings))
}

impl<'de> Deserialize<'de> for Draft {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(d)?;
        draft_from_value(&value)
            .map(|(draft, _)| draft)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Default)]
struct Walker {
    warnings: Vec<ParseWarning>,
}

fn schema(path: &str, message: impl Into<String>) -> DraftError {
    DraftError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

impl Walker {
    fn draft(&mut self, value: &Value) -> Result<Draft, DraftError> {
        let obj = value
            .as_object()
            .ok_or_else(|| schema("$", format!("expected object, found {}", kind(value))))?;
        for key in obj.keys() {
            if !TOP_LEVEL_KEYS.contains(&key.as_str()) {
                return Err(schema(&format!("$.{key}"), "unknown top-level key"));
            }
        }
        let voice = self.array(obj, "$", "voice_over_track")?;
        let voice_over_track = voice
            .iter()
            .enumerate()
            .map(|(i, v)| self.sentence(v, &format!("$.voice_over_track[{i}]")))
            .collect::<Result<_, _>>()?;
        let nodes = self.array(obj, "$", "video_nodes_track")?;
        let video_nodes_track = nodes
            .iter()
            .enumerate()
            .map(|(i, v)| self.node(v, &format!("$.video_nodes_track[{i}]")))
            .collect::<Result<_, _>>()?;
        let deco = field(obj, "$", "decoration_setting")?;
        let decoration_setting = self.decoration(deco, "$.decoration_setting")?;
        Ok(Draft {
            voice_over_track,
            video_nodes_track,
            decoration_setting,
        })
    }

    fn array<'v>(
        &mut self,
        obj: &'v Map<String, Value>,
        parent: &str,
        key: &str,
    ) -> Result<&'v Vec<Value>, DraftError> {
        let v = field(obj, parent, key)?;
        v.as_array()
            .ok_or_else(|| schema(&format!("{parent}.{key}"), format!("expected array, found {}", kind(v))))
    }

    fn object<'v>(&mut self, v: &'v Value, path: &str, known: &[&str]) -> Result<&'v Map<String, Value>, DraftError> {
        let obj = v
            .as_object()
            .ok_or_else(|| schema(path, format!("expected object, found {}", kind(v))))?;
        for key in obj.keys() {
            if !known.contains(&key.as_str()) {
                self.warnings.push(ParseWarning {
                    path: format!("{path}.{key}"),
                    message: "unknown key ignored".to_string(),
                });
            }
        }
        Ok(obj)
    }

    fn sentence(&mut self, v: &Value, path: &str) -> Result<VoiceSentence, DraftError> {
        let obj = self.object(v, path, &["text", "target_start", "target_end"])?;
        let text_v = field(obj, path, "text")?;
        let text = text_v
            .as_str()
            .ok_or_else(|| {
                schema(
                    &format!("{path}.text"),
                    format!("expected string, found {}", kind(text_v)),
                )
            })?
            .to_string();
        Ok(VoiceSentence {
            text,
            target_start: time(obj, path, "target_start")?,
            target_end: time(obj, path, "target_end")?,
        })
    }

    fn node(&mut self, v: &Value, path: &str) -> Result<VideoNode, DraftError> {
        let obj = self.object(v, path, &["index", "target_start", "target_end", "source_start"])?;
        let idx_path = format!("{path}.index");
        let idx_v = field(obj, path, "index")?;
        let index = idx_v.as_u64().and_then(|i| u32::try_from(i).ok()).ok_or_else(|| {
            schema(
                &idx_path,
                format!("expected non-negative integer clip index, found {idx_v}"),
            )
        })?;
        Ok(VideoNode {
            index,
            target_start: time(obj, path, "target_start")?,
            target_end: time(obj, path, "target_end")?,
            source_start: time(obj, path, "source_start")?,
        })
    }

    fn decoration(&mut self, v: &Value, path: &str) -> Result<DecorationSetting, DraftError> {
        let obj = self.object(v, path, &["tts_tags", "avatar_tags", "music_tags"])?;
        let mut deco = DecorationSetting::default();
        for category in TagCategory::ALL {
            let key = category.draft_key();
            let list = self.array(obj, path, key)?;
            let tags = deco.tags_mut(category);
            for (i, t) in list.iter().enumerate() {
                let s = t.as_str().ok_or_else(|| {
                    schema(
                        &format!("{path}.{key}[{i}]"),
                        format!("expected string, found {}", kind(t)),
                    )
                })?;
                tags.push(s.to_string());
            }
        }
        Ok(deco)
    }
}

fn field<'v>(obj: &'v Map<String, Value>, parent: &str, key: &str) -> Result<&'v Value, DraftError> {
    obj.get(key)
        .ok_or_else(|| schema(&format!("{parent}.{key}"), "missing required field"))
}

fn time(obj: &Map<String, Value>, parent: &str, key: &str) -> Result<TimeMs, DraftError> {
    let path = format!("{parent}.{key}");
    let v = field(obj, parent, key)?;
    let Value::Number(n) = v else {
        return Err(schema(
            &path,
            format!("expected integer milliseconds, found {}", kind(v)),
        ));
    };
    if let Some(u) = n.as_u64() {
        Ok(TimeMs(u))
    } else if let Some(i) = n.as_i64() {
        Err(DraftError::NegativeTime { path, value: i })
    } else {
        Err(schema(&path, format!("expected integer milliseconds, found {n}")))
    }
}

/// Checks every draft invariant; clip-bound rules run only when `clips` is
/// given. Violations are data, never errors.
pub fn validate_draft(draft: &Draft, clips: Option<&ClipSet>, tax: &TagTaxonomy) -> ValidationReport {
    let mut report = ValidationReport::new();

    for (i, s) in draft.voice_over_track.iter().enumerate() {
        let path = format!("$.voice_over_track[{i}]");
        if s.text.trim().is_empty() {
            report.push("empty_text", format!("{path}.text"), "sentence text is empty");
        }
        if s.target_start >= s.target_end {
            report.push(
                "voice_bad_span",
                &path,
                format!(
                    "target_start {} not before target_end {}",
                    s.target_start.0, s.target_end.0
                ),
            );
        }
        if i > 0 {
            let prev = &draft.voice_over_track[i - 1];
            if s.target_start < prev.target_start {
                report.push("voice_unsorted", &path, "sentence starts before its predecessor");
            } else if s.target_start < prev.target_end {
                report.push(
                    "voice_overlap",
                    &path,
                    format!(
                        "starts at {} before previous sentence ends at {}",
                        s.target_start.0, prev.target_end.0
                    ),
                );
            }
        }
    }

    let mut seen = HashSet::new();
    for (i, n) in draft.video_nodes_track.iter().enumerate() {
        let path = format!("$.video_nodes_track[{i}]");
        if n.target_start >= n.target_end {
            report.push(
                "node_bad_span",
                &path,
                format!(
                    "target_start {} not before target_end {}",
                    n.target_start.0, n.target_end.0
                ),
            );
        }
        if i > 0 {
            let prev = &draft.video_nodes_track[i - 1];
            if n.target_start < prev.target_start {
                report.push("node_unsorted", &path, "node starts before its predecessor");
            } else if n.target_start < prev.target_end {
                report.push(
                    "node_overlap",
                    &path,
                    format!(
                        "starts at {} before previous node ends at {}",
                        n.target_start.0, prev.target_end.0
                    ),
                );
            } else if n.target_start > prev.target_end {
                report.push(
                    "node_gap",
                    &path,
                    format!("gap of {}ms after previous node", n.target_start.0 - prev.target_end.0),
                );
            }
        }
        if !seen.insert(n.index) {
            report.push(
                "duplicate_clip_index",
                format!("{path}.index"),
                format!("clip {} already used", n.index),
            );
        }
        if let Some(clips) = clips {
            match clips.get(n.index) {
                None => report.push(
                    "unknown_clip_index",
                    format!("{path}.index"),
                    format!("clip {} not in clip set of {}", n.index, clips.len()),
                ),
                Some(clip) => {
                    let needed = n.source_start.0 + n.span();
                    let available = clip.duration_ms().0;
                    if needed > available {
                        report.push(
                            "source_out_of_bounds",
                            &path,
                            format!("needs footage up to {needed}ms, clip {} has {available}ms", n.index),
                        );
                    }
                }
            }
        }
    }

    for category in TagCategory::ALL {
        let key = category.draft_key();
        let mut seen = HashSet::new();
        for (i, tag) in draft.decoration_setting.tags(category).iter().enumerate() {
            let path = format!("$.decoration_setting.{key}[{i}]");
            if !tax.contains(category, tag) {
                report.push("unknown_tag", &path, format!("`{tag}` is not a {category} label"));
            }
            if !seen.insert(tag.as_str()) {
                report.push("duplicate_tag", &path, format!("`{tag}` listed twice"));
            }
        }
    }

    report
}
