use std::fmt::Write as _;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::clips::{ClipMeta, ClipSet};
use crate::draft::{Draft, VideoNode, VoiceSentence};
use crate::sampling::{plan_request, SamplingPlan, SlowFastConfig};

use super::negatives::sample_negative_count;
use super::types::{ClipSource, DatasetSample, Deconstruction, FreePrompt, NegativeCap, ProductInfo};
use super::DatasetError;

pub const IMAGE_PLACEHOLDER: &str = "<image>";

/// Instruction text with `{{name}}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionTemplate {
    text: String,
}

impl InstructionTemplate {
    pub const PLACEHOLDERS: [&'static str; 6] = [
        "product_name",
        "brand",
        "price",
        "selling_points",
        "materials",
        "free_prompt",
    ];

    pub fn new(text: String) -> Result<Self, DatasetError> {
        for name in Self::PLACEHOLDERS {
            if !text.contains(&format!("{{{{{name}}}}}")) {
                return Err(DatasetError::Template(format!("missing placeholder {{{{{name}}}}}")));
            }
        }
        Ok(Self { text })
    }

    pub fn bundled() -> Self {
        Self::new(include_str!("../../data/templates/instruction_v1.txt").to_string())
            .expect("bundled template is complete")
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| DatasetError::Template(format!("{}: {e}", path.display())))?;
        Self::new(text)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn render(&self, product: &ProductInfo, materials: &str, prompt: &FreePrompt) -> String {
        let points: Vec<String> = product
            .selling_points
            .iter()
            .filter(|p| !p.trim().is_empty())
            .map(|p| format!("- {}", p.trim()))
            .collect();
        let values = [
            product.name.trim().to_string(),
            product.brand.trim().to_string(),
            product.price.trim().to_string(),
            points.join("\n"),
            materials.to_string(),
            prompt.text.clone(),
        ];
        // Single pass so placeholder-like text inside values is left alone.
        let mut out = String::with_capacity(self.text.len() + materials.len());
        let mut rest = self.text.as_str();
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            match after.find("}}").map(|close| (&after[..close], close)) {
                Some((name, close)) if Self::PLACEHOLDERS.contains(&name) => {
                    let i = Self::PLACEHOLDERS.iter().position(|p| *p == name).unwrap();
                    out.push_str(&values[i]);
                    rest = &after[close + 2..];
                }
                _ => {
                    out.push_str("{{");
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        out
    }
}

/// Clip blocks in slot order; one `<image>` per sampled frame, grouped by
/// pathway.
pub fn render_materials(clips: &ClipSet, plan: &SamplingPlan) -> String {
    let mut out = String::new();
    for (clip, p) in clips.iter().zip(&plan.clips) {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "Clip {}: duration {}s", clip.index, clip.duration_s);
        let _ = writeln!(
            out,
            "fast ({} fps): {}",
            p.fast.fps,
            IMAGE_PLACEHOLDER.repeat(p.fast.frame_count())
        );
        let _ = write!(
            out,
            "slow ({} fps): {}",
            p.slow.fps,
            IMAGE_PLACEHOLDER.repeat(p.slow.frame_count())
        );
    }
    out
}

/// Builds one sample. Draws the negative count, picks that many pool clips
/// (all of them if the pool is short), shuffles positives and negatives into
/// presentation slots, and writes the ground truth over the positive slots in
/// source order.
#[allow(clippy::too_many_arguments)]
pub fn assemble_sample(
    sample_id: u64,
    dec: &Deconstruction,
    product: &ProductInfo,
    prompt: &FreePrompt,
    negative_pool: &[ClipSource],
    sampling: &SlowFastConfig,
    template: &InstructionTemplate,
    rng: &mut impl Rng,
) -> Result<DatasetSample, DatasetError> {
    if dec.shot_count() == 0 || dec.asr_sentences.is_empty() {
        return Err(DatasetError::EmptyDeconstruction(dec.video_id.clone()));
    }
    if negative_pool.iter().any(|c| c.video_id == dec.video_id) {
        return Err(DatasetError::PoolOverlap(dec.video_id.clone()));
    }
    product.check()?;
    prompt.check()?;

    let drawn = sample_negative_count(rng);
    let take = (drawn as usize).min(negative_pool.len());
    let negative_cap = (take < drawn as usize).then_some(NegativeCap {
        drawn,
        available: negative_pool.len() as u32,
    });
    let picked = index::sample(rng, negative_pool.len(), take);

    let mut canonical: Vec<ClipSource> = (0..dec.shot_count())
        .map(|k| {
            let (start_ms, end_ms) = dec.shot(k);
            ClipSource {
                video_id: dec.video_id.clone(),
                start_ms,
                end_ms,
                native_fps: dec.native_fps,
            }
        })
        .collect();
    canonical.extend(picked.iter().map(|i| negative_pool[i].clone()));
    let positive_count = dec.shot_count() as u32;

    let mut clip_order: Vec<u32> = (0..canonical.len() as u32).collect();
    clip_order.shuffle(rng);
    let mut slot_of = vec![0u32; canonical.len()];
    for (slot, &id) in clip_order.iter().enumerate() {
        slot_of[id as usize] = slot as u32;
    }

    let clip_sources: Vec<ClipSource> = clip_order.iter().map(|&id| canonical[id as usize].clone()).collect();
    let metas = clip_sources
        .iter()
        .enumerate()
        .map(|(slot, s)| ClipMeta::from_span(slot as u32, s.span_ms(), s.native_fps))
        .collect::<Result<Vec<_>, _>>()?;
    let clips = ClipSet::new(metas)?;
    let plan = plan_request(&clips, sampling)?;
    let instruction = template.render(product, &render_materials(&clips, &plan), prompt);

    let ground_truth = Draft {
        voice_over_track: dec
            .asr_sentences
            .iter()
            .map(|s| VoiceSentence::new(s.text.trim(), s.start.0, s.end.0))
            .collect(),
        video_nodes_track: (0..dec.shot_count())
            .map(|k| {
                let (start, end) = dec.shot(k);
                VideoNode::new(slot_of[k], start, end, 0)
            })
            .collect(),
        decoration_setting: dec.recommended_tags.clone(),
    };
    let mut negatives: Vec<u32> = (positive_count as usize..canonical.len())
        .map(|id| slot_of[id])
        .collect();
    negatives.sort_unstable();

    Ok(DatasetSample {
        sample_id,
        video_id: dec.video_id.clone(),
        instruction,
        product: product.clone(),
        free_prompt: prompt.clone(),
        clips: clips.as_slice().to_vec(),
        clip_sources,
        clip_order,
        positive_count,
        negatives,
        ground_truth,
        negative_cap,
    })
}

impl DatasetSample {
    pub fn clip_set(&self) -> ClipSet {
        ClipSet::new(self.clips.clone()).expect("sample clips have unique slots")
    }
}
