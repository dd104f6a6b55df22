use crate::backends::{api, Backends, CaptionRequest, FrameRef};
use crate::clips::ClipMeta;
use crate::draft::TimeMs;
use crate::sampling::sample_frames;
use crate::taxonomy::{TagCategory, TagTaxonomy};

use super::types::{AsrSegment, Deconstruction, VideoRef};
use super::DatasetError;

/// Frame rate of the sparse frames sent to the captioner.
pub const CAPTION_FPS: f64 = 0.5;
pub const MIN_SOURCE_FPS: f64 = 2.0;
pub const MAX_SOURCE_FPS: f64 = 240.0;

/// Shortest span holding one whole source frame.
pub fn min_shot_ms(native_fps: f64) -> u64 {
    (1000.0 / native_fps).ceil() as u64
}

impl VideoRef {
    pub fn check(&self) -> Result<(), DatasetError> {
        let bad = |message: String| DatasetError::InvalidVideo {
            video_id: self.video_id.clone(),
            message,
        };
        if self.video_id.is_empty() {
            return Err(bad("empty video_id".into()));
        }
        if !(MIN_SOURCE_FPS..=MAX_SOURCE_FPS).contains(&self.native_fps) {
            return Err(bad(format!(
                "native_fps {} outside [{MIN_SOURCE_FPS}, {MAX_SOURCE_FPS}]",
                self.native_fps
            )));
        }
        if self.duration_ms < min_shot_ms(self.native_fps) {
            return Err(bad(format!(
                "duration {} ms is shorter than one frame",
                self.duration_ms
            )));
        }
        self.product.check()
    }
}

/// Turns detected cut times into shot boundaries: sorted, deduplicated,
/// framed by `0` and `duration_ms`, no shot shorter than one source frame.
pub fn normalize_cuts(cuts: &[u64], duration_ms: u64, native_fps: f64) -> Vec<TimeMs> {
    let min_gap = min_shot_ms(native_fps);
    let mut sorted: Vec<u64> = cuts.iter().copied().filter(|&c| c > 0 && c < duration_ms).collect();
    sorted.sort_unstable();
    sorted.dedup();
    let mut bounds = vec![0u64];
    for c in sorted {
        if c - bounds.last().unwrap() >= min_gap {
            bounds.push(c);
        }
    }
    while bounds.len() > 1 && duration_ms - bounds.last().unwrap() < min_gap {
        bounds.pop();
    }
    bounds.push(duration_ms);
    bounds.into_iter().map(TimeMs).collect()
}

/// Sorts segments, clips them to the video, and resolves overlaps by
/// truncating the earlier segment. Empty and zero-length segments are
/// dropped. Every change is reported as a warning.
pub fn normalize_asr(segments: &[AsrSegment], duration_ms: u64) -> (Vec<AsrSegment>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut segs: Vec<AsrSegment> = segments.to_vec();
    segs.sort_by_key(|s| (s.start, s.end));
    for s in &mut segs {
        if s.end.0 > duration_ms {
            warnings.push(format!(
                "asr segment at {} ends after the video; clipped to {duration_ms} ms",
                s.start
            ));
            s.end = TimeMs(duration_ms);
        }
    }
    for i in 0..segs.len().saturating_sub(1) {
        let next_start = segs[i + 1].start;
        if segs[i].end > next_start {
            warnings.push(format!(
                "asr segment {i} overlaps the next one; end truncated from {} to {}",
                segs[i].end, next_start
            ));
            segs[i].end = next_start;
        }
    }
    let mut out = Vec::with_capacity(segs.len());
    for s in segs {
        if s.text.trim().is_empty() || s.start >= s.end {
            warnings.push(format!("asr segment at {} dropped (empty)", s.start));
        } else {
            out.push(s);
        }
    }
    (out, warnings)
}

/// Runs every extraction backend on one video.
pub fn deconstruct(video: &VideoRef, backends: &Backends, tax: &TagTaxonomy) -> Result<Deconstruction, DatasetError> {
    video.check()?;
    let raw_asr = api::asr(&backends.asr, video)?;
    let subtitle_ocr = api::ocr(&backends.ocr, video)?;
    let cuts = api::shots(&backends.shots, video)?;

    let mut warnings = Vec::new();
    let shot_boundaries = normalize_cuts(&cuts, video.duration_ms, video.native_fps);
    let kept = shot_boundaries.len() - 2;
    if kept != cuts.len() {
        warnings.push(format!("{} of {} detected cuts kept", kept, cuts.len()));
    }

    let mut shot_captions = Vec::with_capacity(shot_boundaries.len() - 1);
    for (k, w) in shot_boundaries.windows(2).enumerate() {
        let clip = ClipMeta::from_span(k as u32, w[1].0 - w[0].0, video.native_fps)?;
        let frames = sample_frames(&clip, CAPTION_FPS)
            .into_iter()
            .map(|frame_index| FrameRef {
                clip_index: k as u32,
                frame_index,
                timestamp: w[0].0 as f64 / 1000.0 + frame_index as f64 / clip.native_fps(),
            })
            .collect();
        let req = CaptionRequest {
            video_id: video.video_id.clone(),
            shot: k as u32,
            start_ms: w[0].0,
            end_ms: w[1].0,
            frames,
        };
        shot_captions.push(api::caption(&backends.caption, &req)?);
    }

    let (mut asr_sentences, asr_warnings) = normalize_asr(&raw_asr, video.duration_ms);
    warnings.extend(asr_warnings);
    let texts: Vec<String> = asr_sentences.iter().map(|s| s.text.clone()).collect();
    let corrected = api::correct_asr(&backends.judge, &video.video_id, &texts)?;
    for (s, text) in asr_sentences.iter_mut().zip(corrected) {
        s.text = text;
    }
    let before = asr_sentences.len();
    asr_sentences.retain(|s| !s.text.trim().is_empty());
    if asr_sentences.len() != before {
        warnings.push(format!(
            "{} sentences emptied by correction",
            before - asr_sentences.len()
        ));
    }
    if asr_sentences.is_empty() {
        return Err(DatasetError::EmptyDeconstruction(video.video_id.clone()));
    }

    let mut recommended_tags = api::recommend_tags(
        &backends.judge,
        &video.video_id,
        &asr_sentences,
        &subtitle_ocr,
        &shot_captions,
    )?;
    for cat in TagCategory::ALL {
        let tags = recommended_tags.tags_mut(cat);
        let mut seen = Vec::with_capacity(tags.len());
        for t in tags.drain(..) {
            if !tax.contains(cat, &t) {
                warnings.push(format!("dropped unknown {} tag `{t}`", cat.as_str()));
            } else if !seen.contains(&t) {
                seen.push(t);
            }
        }
        *tags = seen;
    }

    Ok(Deconstruction {
        video_id: video.video_id.clone(),
        duration_ms: video.duration_ms,
        native_fps: video.native_fps,
        asr_sentences,
        subtitle_ocr,
        shot_boundaries,
        shot_captions,
        recommended_tags,
        warnings,
    })
}
