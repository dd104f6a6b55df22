//! Post-processing a draft into a renderable plan: re-time the tracks to the
//! realized TTS durations and resolve decoration tags to catalog assets.
//!
//! The voice track is authoritative. Each sentence is stretched or shrunk to
//! its realized duration while the silences between sentences keep their
//! drafted length; this defines a piecewise-linear warp of the drafted time
//! axis. Video node boundaries are pushed through the same warp, so every
//! clip stays synchronized with the sentences it covered, and portions of a
//! node outside any sentence keep their length. Boundaries are rounded to
//! the nearest unit of the inputs' common time grid (1 ms for arbitrary
//! inputs); the final node absorbs the residue and is extended to cover the
//! last sentence if needed.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clips::ClipSet;
use crate::draft::{Draft, TimeMs, VideoNode, VoiceSentence};
use crate::report::ValidationReport;
use crate::taxonomy::{TagCategory, TagTaxonomy};

#[derive(Debug, Error, PartialEq)]
pub enum TimelineError {
    #[error("TTS realization has {got} durations for {expected} sentences")]
    LengthMismatch { expected: usize, got: usize },
    #[error("realized duration of sentence {0} is zero")]
    ZeroDuration(usize),
    #[error("draft has no video nodes")]
    EmptyVideoTrack,
    #[error("draft tracks are not well-formed: {0}")]
    InvalidDraft(String),
    #[error("node {node} references clip {clip}, which is not in the clip set")]
    UnknownClip { node: usize, clip: u32 },
    #[error("node {node} (clip {clip}) needs {shortfall_ms}ms more footage than the clip has after source_start")]
    ClipTooShort { node: usize, clip: u32, shortfall_ms: u64 },
    #[error("no {0} asset in the catalog")]
    NoCandidate(TagCategory),
    #[error("catalog: {0}")]
    Catalog(String),
}

/// Realized TTS duration per voice sentence, by position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TtsRealization(pub Vec<TimeMs>);

impl TtsRealization {
    pub fn from_millis(durations: impl IntoIterator<Item = u64>) -> Self {
        Self(durations.into_iter().map(TimeMs).collect())
    }

    /// The drafted spans, i.e. a realization that changes nothing.
    pub fn identity(draft: &Draft) -> Self {
        Self::from_millis(draft.voice_over_track.iter().map(|s| s.span()))
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|d| d.0).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetEntry {
    pub asset_id: String,
    pub category: TagCategory,
    pub labels: Vec<String>,
    pub uri: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct AssetCatalog {
    entries: Vec<AssetEntry>,
}

impl AssetCatalog {
    pub fn new(entries: Vec<AssetEntry>, tax: &TagTaxonomy) -> Result<Self, TimelineError> {
        let mut ids = HashSet::new();
        for e in &entries {
            if !ids.insert(e.asset_id.as_str()) {
                return Err(TimelineError::Catalog(format!("duplicate asset_id `{}`", e.asset_id)));
            }
            if let Some(bad) = e.labels.iter().find(|l| !tax.contains(e.category, l)) {
                return Err(TimelineError::Catalog(format!(
                    "asset `{}` has unknown {} label `{bad}`",
                    e.asset_id, e.category
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_json(bytes: &[u8], tax: &TagTaxonomy) -> Result<Self, TimelineError> {
        let entries: Vec<AssetEntry> =
            serde_json::from_slice(bytes).map_err(|e| TimelineError::Catalog(e.to_string()))?;
        Self::new(entries, tax)
    }

    pub fn contains(&self, asset_id: &str) -> bool {
        self.entries.iter().any(|e| e.asset_id == asset_id)
    }

    pub fn entries(&self) -> &[AssetEntry] {
        &self.entries
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolvedAssets {
    pub tts_asset: String,
    pub avatar_asset: Option<String>,
    pub music_asset: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RenderPlan {
    pub voice_over_track: Vec<VoiceSentence>,
    pub video_nodes_track: Vec<VideoNode>,
    pub assets: Option<ResolvedAssets>,
    pub total_duration: TimeMs,
}

impl RenderPlan {
    pub fn to_canonical_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("plan serializes")
    }

    pub fn clip_indices(&self) -> Vec<u32> {
        self.video_nodes_track.iter().map(|n| n.index).collect()
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Piecewise-linear map from drafted to aligned time, on the reduced grid.
struct Warp {
    // (drafted start, drafted end, aligned start, aligned end)
    segments: Vec<(u64, u64, u64, u64)>,
}

impl Warp {
    fn new(starts_ends: &[(u64, u64)], realized: &[u64]) -> Self {
        let mut segments = Vec::with_capacity(starts_ends.len());
        let mut prev: Option<(u64, u64)> = None; // (drafted end, aligned end)
        for (&(s, e), &r) in starts_ends.iter().zip(realized) {
            let new_start = match prev {
                None => s,
                Some((pe, pne)) => pne + (s - pe),
            };
            segments.push((s, e, new_start, new_start + r));
            prev = Some((e, new_start + r));
        }
        Self { segments }
    }

    fn aligned_voice_end(&self) -> Option<u64> {
        self.segments.last().map(|seg| seg.3)
    }

    fn map(&self, x: u64) -> u64 {
        // last sentence end at or before x: (drafted, aligned)
        let mut anchor = None;
        for &(s, e, ns, ne) in &self.segments {
            if x < s {
                break;
            }
            if x <= e {
                let (a, r, d) = ((x - s) as u128, (ne - ns) as u128, (e - s) as u128);
                // round half up of a·r/d
                return ns + ((2 * a * r + d) / (2 * d)) as u64;
            }
            anchor = Some((e, ne));
        }
        match anchor {
            Some((e, ne)) => ne + (x - e),
            None => x,
        }
    }
}

fn check_tracks(draft: &Draft) -> Result<(), TimelineError> {
    let mut prev_end = 0;
    for (i, s) in draft.voice_over_track.iter().enumerate() {
        if s.target_start >= s.target_end || s.target_start.0 < prev_end {
            return Err(TimelineError::InvalidDraft(format!(
                "voice sentence {i} is empty, unsorted or overlapping"
            )));
        }
        prev_end = s.target_end.0;
    }
    let mut prev_end = None;
    for (i, n) in draft.video_nodes_track.iter().enumerate() {
        if n.target_start >= n.target_end || prev_end.is_some_and(|e| e != n.target_start.0) {
            return Err(TimelineError::InvalidDraft(format!(
                "video node {i} is empty or not contiguous"
            )));
        }
        prev_end = Some(n.target_end.0);
    }
    Ok(())
}

/// Re-times `draft` to the realized TTS durations. The draft should pass
/// `validate_draft`; clip bounds are enforced here against `clips`.
pub fn align_draft(draft: &Draft, tts: &TtsRealization, clips: &ClipSet) -> Result<RenderPlan, TimelineError> {
    let sentences = &draft.voice_over_track;
    if tts.0.len() != sentences.len() {
        return Err(TimelineError::LengthMismatch {
            expected: sentences.len(),
            got: tts.0.len(),
        });
    }
    if let Some(i) = tts.0.iter().position(|d| d.0 == 0) {
        return Err(TimelineError::ZeroDuration(i));
    }
    if draft.video_nodes_track.is_empty() {
        return Err(TimelineError::EmptyVideoTrack);
    }
    check_tracks(draft)?;

    // Work on the coarsest common grid so that scaling every input time by
    // an integer scales every output time by the same integer exactly.
    let grid = sentences
        .iter()
        .flat_map(|s| [s.target_start.0, s.target_end.0])
        .chain(
            draft
                .video_nodes_track
                .iter()
                .flat_map(|n| [n.target_start.0, n.target_end.0]),
        )
        .chain(tts.0.iter().map(|d| d.0))
        .fold(0, gcd)
        .max(1);

    let spans: Vec<(u64, u64)> = sentences
        .iter()
        .map(|s| (s.target_start.0 / grid, s.target_end.0 / grid))
        .collect();
    let realized: Vec<u64> = tts.0.iter().map(|d| d.0 / grid).collect();
    let warp = Warp::new(&spans, &realized);

    let voice_over_track = sentences
        .iter()
        .zip(&warp.segments)
        .map(|(s, &(_, _, ns, ne))| VoiceSentence {
            text: s.text.clone(),
            target_start: TimeMs(ns * grid),
            target_end: TimeMs(ne * grid),
        })
        .collect();

    let nodes = &draft.video_nodes_track;
    let mut bounds = Vec::with_capacity(nodes.len() + 1);
    bounds.push(warp.map(nodes[0].target_start.0 / grid));
    for node in nodes {
        let prev = *bounds.last().expect("non-empty");
        bounds.push(warp.map(node.target_end.0 / grid).max(prev + 1));
    }
    if let Some(voice_end) = warp.aligned_voice_end() {
        let last = bounds.last_mut().expect("non-empty");
        *last = (*last).max(voice_end);
    }

    let mut video_nodes_track = Vec::with_capacity(nodes.len());
    for (k, node) in nodes.iter().enumerate() {
        let start = bounds[k] * grid;
        let end = bounds[k + 1] * grid;
        let clip = clips.get(node.index).ok_or(TimelineError::UnknownClip {
            node: k,
            clip: node.index,
        })?;
        let needed = node.source_start.0 + (end - start);
        let available = clip.duration_ms().0;
        if needed > available {
            return Err(TimelineError::ClipTooShort {
                node: k,
                clip: node.index,
                shortfall_ms: needed - available,
            });
        }
        video_nodes_track.push(VideoNode {
            index: node.index,
            target_start: TimeMs(start),
            target_end: TimeMs(end),
            source_start: node.source_start,
        });
    }

    Ok(RenderPlan {
        total_duration: TimeMs(bounds[nodes.len()] * grid),
        voice_over_track,
        video_nodes_track,
        assets: None,
    })
}

/// Picks, per category, the asset with the largest label overlap with the
/// draft's tags; ties go to the lexicographically smallest `asset_id`. The
/// avatar is skipped when the draft has no avatar tags. `_seed` is accepted
/// for randomized selection policies; the current rule is deterministic.
pub fn match_decorations(draft: &Draft, catalog: &AssetCatalog, _seed: u64) -> Result<ResolvedAssets, TimelineError> {
    let pick = |category: TagCategory| -> Result<String, TimelineError> {
        let wanted: HashSet<&str> = draft
            .decoration_setting
            .tags(category)
            .iter()
            .map(String::as_str)
            .collect();
        catalog
            .entries
            .iter()
            .filter(|e| e.category == category)
            .map(|e| {
                let score = e.labels.iter().filter(|l| wanted.contains(l.as_str())).count();
                (score, e.asset_id.as_str())
            })
            .max_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(a.1)))
            .map(|(_, id)| id.to_string())
            .ok_or(TimelineError::NoCandidate(category))
    };
    let avatar_asset = if draft.decoration_setting.avatar_tags.is_empty() {
        None
    } else {
        Some(pick(TagCategory::Avatar)?)
    };
    Ok(ResolvedAssets {
        tts_asset: pick(TagCategory::Tts)?,
        avatar_asset,
        music_asset: pick(TagCategory::Music)?,
    })
}

/// Alignment followed by asset resolution.
pub fn build_render_plan(
    draft: &Draft,
    tts: &TtsRealization,
    clips: &ClipSet,
    catalog: &AssetCatalog,
    seed: u64,
) -> Result<RenderPlan, TimelineError> {
    let mut plan = align_draft(draft, tts, clips)?;
    plan.assets = Some(match_decorations(draft, catalog, seed)?);
    Ok(plan)
}

/// Re-checks the render plan invariants.
pub fn check_alignment(plan: &RenderPlan) -> ValidationReport {
    let mut report = ValidationReport::new();
    let total = plan.total_duration;

    for (i, s) in plan.voice_over_track.iter().enumerate() {
        let path = format!("$.voice_over_track[{i}]");
        if s.target_start >= s.target_end {
            report.push("voice_bad_span", &path, "empty or inverted span");
        }
        if let Some(prev) = i.checked_sub(1).map(|j| &plan.voice_over_track[j]) {
            if s.target_start < prev.target_start {
                report.push("voice_unsorted", &path, "sentence starts before its predecessor");
            } else if s.target_start < prev.target_end {
                report.push("voice_overlap", &path, "sentence overlaps its predecessor");
            }
        }
        if s.target_end > total {
            report.push(
                "voice_past_end",
                &path,
                format!("ends at {} after total duration {}", s.target_end.0, total.0),
            );
        }
    }

    for (i, n) in plan.video_nodes_track.iter().enumerate() {
        let path = format!("$.video_nodes_track[{i}]");
        if n.target_start >= n.target_end {
            report.push("node_bad_span", &path, "empty or inverted span");
        }
        if let Some(prev) = i.checked_sub(1).map(|j| &plan.video_nodes_track[j]) {
            if n.target_start < prev.target_start {
                report.push("node_unsorted", &path, "node starts before its predecessor");
            } else if n.target_start < prev.target_end {
                report.push("node_overlap", &path, "node overlaps its predecessor");
            }
        }
    }

    match plan.video_nodes_track.last() {
        None => report.push("empty_video_track", "$.video_nodes_track", "plan has no video nodes"),
        Some(last) if last.target_end != total => report.push(
            "total_mismatch",
            "$.total_duration",
            format!("total {} differs from last node end {}", total.0, last.target_end.0),
        ),
        Some(_) => {}
    }
    report
}

/// `check_alignment` plus asset existence against the catalog.
pub fn check_alignment_with_catalog(plan: &RenderPlan, catalog: &AssetCatalog) -> ValidationReport {
    let mut report = check_alignment(plan);
    if let Some(assets) = &plan.assets {
        let ids = [
            ("tts_asset", Some(&assets.tts_asset)),
            ("avatar_asset", assets.avatar_asset.as_ref()),
            ("music_asset", Some(&assets.music_asset)),
        ];
        for (key, id) in ids {
            if let Some(id) = id.filter(|id| !catalog.contains(id)) {
                report.push(
                    "unknown_asset",
                    format!("$.assets.{key}"),
                    format!("`{id}` not in catalog"),
                );
            }
        }
    }
    report
}
