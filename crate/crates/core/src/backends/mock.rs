//! Deterministic in-process backend serving every role.
//!
//! Responses are pure functions of the seed, the fixtures and the request
//! body. Fixture data wins where present; anything else is synthesized from a
//! seeded hash of the request so whole pipelines run offline.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use indexmap::IndexMap;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::dataset::types::{render_prompt_text, Analysis, AsrSegment, Deconstruction, Dimension, FreePrompt};
use crate::draft::{serialize_draft, DecorationSetting, Draft, TimeMs};
use crate::taxonomy::{TagCategory, TagTaxonomy};

use super::api::{rubric_caps, FREE_PROMPT_RUBRIC};
use super::{HttpReply, Transport, TransportFailure};

pub const MOCK_BASE_URL: &str = "mock://local";
pub const MOCK_MODEL_ID: &str = "mock-draft-model";
pub const DEFAULT_EMBED_DIM: usize = 16;

/// Scripted outputs for one source video. Unset fields are synthesized.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockVideo {
    #[serde(default)]
    pub asr: Option<Vec<AsrSegment>>,
    #[serde(default)]
    pub ocr: Option<Vec<String>>,
    #[serde(default)]
    pub cuts: Option<Vec<u64>>,
    #[serde(default)]
    pub captions: Option<Vec<String>>,
    #[serde(default)]
    pub tags: Option<DecorationSetting>,
    #[serde(default)]
    pub corrections: Option<Vec<String>>,
    #[serde(default)]
    pub analysis: Option<Analysis>,
}

/// What the generation mock knows about a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockSample {
    pub ground_truth: Draft,
    pub negatives: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockFixtures {
    #[serde(default)]
    pub videos: BTreeMap<String, MockVideo>,
    #[serde(default)]
    pub samples: BTreeMap<u64, MockSample>,
    /// Judge scores returned verbatim per rubric id, bypassing caps.
    #[serde(default)]
    pub judge_scores: BTreeMap<String, IndexMap<String, f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    None,
    /// Swap the clip indices of two neighbouring video nodes.
    SwapAdjacent,
    /// Replace one node's clip with a negative clip.
    InjectNegative,
    /// Remove one decoration tag.
    DropTag,
}

impl std::str::FromStr for Corruption {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Corruption::None),
            "swap_adjacent" => Ok(Corruption::SwapAdjacent),
            "inject_negative" => Ok(Corruption::InjectNegative),
            "drop_tag" => Ok(Corruption::DropTag),
            other => Err(format!("unknown corruption `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    Approve,
    AlwaysRevise,
    /// Revises into a prompt with no dimensions.
    InvalidRevision,
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
    fixtures: Arc<MockFixtures>,
    corruption: Corruption,
    corruption_rate: f64,
    verify_mode: VerifyMode,
    embed_dim: usize,
    taxonomy: Arc<TagTaxonomy>,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            fixtures: Arc::new(MockFixtures::default()),
            corruption: Corruption::None,
            corruption_rate: 0.0,
            verify_mode: VerifyMode::Approve,
            embed_dim: DEFAULT_EMBED_DIM,
            taxonomy: Arc::new(TagTaxonomy::default_taxonomy()),
        }
    }

    pub fn with_fixtures(mut self, fixtures: MockFixtures) -> Self {
        self.fixtures = Arc::new(fixtures);
        self
    }

    /// Corrupts a `rate` fraction of generated drafts.
    pub fn with_corruption(mut self, corruption: Corruption, rate: f64) -> Self {
        self.corruption = corruption;
        self.corruption_rate = rate.clamp(0.0, 1.0);
        self
    }

    pub fn with_verify_mode(mut self, mode: VerifyMode) -> Self {
        self.verify_mode = mode;
        self
    }

    pub fn with_embed_dim(mut self, dim: usize) -> Self {
        self.embed_dim = dim.max(1);
        self
    }

    pub fn with_taxonomy(mut self, taxonomy: TagTaxonomy) -> Self {
        self.taxonomy = Arc::new(taxonomy);
        self
    }

    pub fn fixtures(&self) -> &MockFixtures {
        &self.fixtures
    }

    fn digest(&self, parts: &[&[u8]]) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        h.finalize().into()
    }

    fn rng(&self, parts: &[&[u8]]) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.digest(parts))
    }

    /// Whether sample `i` is corrupted. With offset `u ∈ [0, 1)` fixed by the
    /// seed, the count over ids `0..n` is `floor(n·rate + u)`.
    pub fn is_corrupted(&self, sample_id: u64) -> bool {
        if self.corruption == Corruption::None || self.corruption_rate == 0.0 {
            return false;
        }
        let d = self.digest(&[b"corruption-offset"]);
        let u = (u64::from_le_bytes(d[..8].try_into().unwrap()) >> 11) as f64 / (1u64 << 53) as f64;
        let r = self.corruption_rate;
        let i = sample_id as f64;
        ((i + 1.0) * r + u).floor() - (i * r + u).floor() > 0.0
    }

    /// The draft the generation mock answers for `sample_id`.
    pub fn predicted_draft(&self, sample_id: u64) -> Option<Draft> {
        let sample = self.fixtures.samples.get(&sample_id)?;
        let mut draft = sample.ground_truth.clone();
        if self.is_corrupted(sample_id) {
            let mut rng = self.rng(&[b"corrupt", &sample_id.to_le_bytes()]);
            apply_corruption(&mut draft, self.corruption, &sample.negatives, &mut rng);
        }
        Some(draft)
    }

    fn handle(&self, role: &str, body: &[u8]) -> HttpReply {
        let Ok(req) = serde_json::from_slice::<Value>(body) else {
            return reply(400, json!({"error": "body is not JSON"}));
        };
        let result = match role {
            "generate" => self.generate(&req),
            "judge" => self.judge(&req),
            "embed" => self.embed(&req),
            "asr" => self.asr(&req),
            "ocr" => self.ocr(&req),
            "shots" => self.shots(&req),
            "caption" => self.caption(&req),
            _ => Err((404, format!("no route for {role}"))),
        };
        match result {
            Ok(v) => reply(200, v),
            Err((code, msg)) => reply(code, json!({ "error": msg })),
        }
    }

    fn generate(&self, req: &Value) -> Result<Value, (u16, String)> {
        let id = req["sample_id"]
            .as_u64()
            .ok_or((400, "missing sample_id".to_string()))?;
        let draft = self.predicted_draft(id).ok_or((404, format!("unknown sample {id}")))?;
        let text = String::from_utf8(serialize_draft(&draft)).expect("canonical drafts are UTF-8");
        Ok(json!({"model_id": MOCK_MODEL_ID, "draft_json": text}))
    }

    fn judge(&self, req: &Value) -> Result<Value, (u16, String)> {
        let bad = |m: &str| (400u16, m.to_string());
        match req["task"].as_str().unwrap_or_default() {
            "score" => {
                let id = req["rubric_id"].as_str().ok_or_else(|| bad("missing rubric_id"))?;
                if let Some(scores) = self.fixtures.judge_scores.get(id) {
                    return Ok(json!({ "scores": scores }));
                }
                let mut caps = rubric_caps(id).ok_or_else(|| bad("unknown rubric"))?;
                if id == FREE_PROMPT_RUBRIC {
                    if let Some(dims) = req["payload"]["free_prompt"]["dimensions"].as_object() {
                        caps.retain(|k, _| dims.contains_key(k));
                    }
                }
                Ok(json!({ "scores": caps }))
            }
            "recommend_tags" => {
                let vid = req["video_id"].as_str().ok_or_else(|| bad("missing video_id"))?;
                let tags = match self.video(vid).and_then(|v| v.tags.clone()) {
                    Some(t) => t,
                    None => self.synth_tags(vid),
                };
                Ok(json!({ "tags": tags }))
            }
            "correct_asr" => {
                let vid = req["video_id"].as_str().ok_or_else(|| bad("missing video_id"))?;
                let sentences = req["sentences"].clone();
                match self.video(vid).and_then(|v| v.corrections.clone()) {
                    Some(c) => Ok(json!({ "sentences": c })),
                    None => Ok(json!({ "sentences": sentences })),
                }
            }
            "analyze" => {
                let dec: Deconstruction = serde_json::from_value(req["deconstruction"].clone())
                    .map_err(|e| bad(&format!("deconstruction: {e}")))?;
                let analysis = match self.video(&dec.video_id).and_then(|v| v.analysis.clone()) {
                    Some(a) => a,
                    None => synth_analysis(&dec),
                };
                Ok(json!({ "analysis": analysis }))
            }
            "verify" => {
                let prompt: FreePrompt =
                    serde_json::from_value(req["prompt"].clone()).map_err(|e| bad(&format!("prompt: {e}")))?;
                Ok(match self.verify_mode {
                    VerifyMode::Approve => json!({"approved": true}),
                    VerifyMode::AlwaysRevise => json!({"approved": false, "revised": revise(&prompt)}),
                    VerifyMode::InvalidRevision => {
                        json!({"approved": false, "revised": {"dimensions": {}, "text": ""}})
                    }
                })
            }
            other => Err(bad(&format!("unknown judge task `{other}`"))),
        }
    }

    fn embed(&self, req: &Value) -> Result<Value, (u16, String)> {
        let inputs = req["inputs"].as_array().ok_or((400, "missing inputs".to_string()))?;
        let vectors: Vec<Vec<f64>> = inputs
            .iter()
            .map(|input| {
                let key = serde_json::to_vec(input).expect("value serializes");
                let mut rng = self.rng(&[b"embed", &key]);
                (0..self.embed_dim).map(|_| rng.random_range(-1.0..1.0)).collect()
            })
            .collect();
        Ok(json!({ "vectors": vectors }))
    }

    fn video(&self, id: &str) -> Option<&MockVideo> {
        self.fixtures.videos.get(id)
    }

    fn video_args<'a>(&self, req: &'a Value) -> Result<(&'a str, u64), (u16, String)> {
        let id = req["video_id"].as_str().ok_or((400, "missing video_id".to_string()))?;
        let duration = req["duration_ms"]
            .as_u64()
            .ok_or((400, "missing duration_ms".to_string()))?;
        Ok((id, duration))
    }

    fn asr(&self, req: &Value) -> Result<Value, (u16, String)> {
        let (id, duration) = self.video_args(req)?;
        let segments = match self.video(id).and_then(|v| v.asr.clone()) {
            Some(s) => s,
            None => self.synth_asr(id, duration),
        };
        Ok(json!({ "segments": segments }))
    }

    fn ocr(&self, req: &Value) -> Result<Value, (u16, String)> {
        let (id, duration) = self.video_args(req)?;
        let texts = match self.video(id).and_then(|v| v.ocr.clone()) {
            Some(t) => t,
            None => self
                .synth_asr(id, duration)
                .into_iter()
                .map(|s| s.text)
                .take(2)
                .collect(),
        };
        Ok(json!({ "texts": texts }))
    }

    fn shots(&self, req: &Value) -> Result<Value, (u16, String)> {
        let (id, duration) = self.video_args(req)?;
        let cuts = match self.video(id).and_then(|v| v.cuts.clone()) {
            Some(c) => c,
            None => self.synth_cuts(id, duration),
        };
        Ok(json!({ "cuts": cuts }))
    }

    fn caption(&self, req: &Value) -> Result<Value, (u16, String)> {
        let id = req["video_id"].as_str().ok_or((400, "missing video_id".to_string()))?;
        let shot = req["shot"].as_u64().ok_or((400, "missing shot".to_string()))?;
        if let Some(c) = self.video(id).and_then(|v| v.captions.as_ref()) {
            let text = c
                .get(shot as usize)
                .ok_or((404, format!("no caption for shot {shot}")))?;
            return Ok(json!({ "caption": text }));
        }
        let mut rng = self.rng(&[b"caption", id.as_bytes(), &shot.to_le_bytes()]);
        let subject = SUBJECTS.choose(&mut rng).unwrap();
        let action = ACTIONS.choose(&mut rng).unwrap();
        Ok(json!({ "caption": format!("{subject} {action}") }))
    }

    /// Three to six shots of at least one second each.
    fn synth_cuts(&self, id: &str, duration: u64) -> Vec<u64> {
        let mut rng = self.rng(&[b"cuts", id.as_bytes()]);
        let shots = rng.random_range(3u64..=6).min(duration / 1000).max(1);
        let step = duration / shots;
        (1..shots)
            .map(|k| {
                let jitter = step / 4;
                k * step - jitter + rng.random_range(0..=2 * jitter)
            })
            .collect()
    }

    fn synth_asr(&self, id: &str, duration: u64) -> Vec<AsrSegment> {
        let mut rng = self.rng(&[b"asr", id.as_bytes()]);
        let n = rng.random_range(2u64..=4).min(duration / 500).max(1);
        let step = duration / n;
        (0..n)
            .map(|k| {
                let pad = (step / 10).min(150);
                let text = SCRIPT_LINES.choose(&mut rng).unwrap();
                AsrSegment::new(*text, k * step + pad, (k + 1) * step - pad)
            })
            .collect()
    }

    fn synth_tags(&self, id: &str) -> DecorationSetting {
        let mut rng = self.rng(&[b"tags", id.as_bytes()]);
        let mut tags = DecorationSetting::default();
        for cat in TagCategory::ALL {
            let mut labels: Vec<&str> = Vec::new();
            for (_, subcat_labels) in self.taxonomy.subcategories(cat) {
                for l in subcat_labels {
                    if !labels.contains(&l.as_str()) {
                        labels.push(l);
                    }
                }
            }
            let count = match cat {
                TagCategory::Avatar => rng.random_range(0..=3),
                _ => rng.random_range(1..=2),
            };
            labels.shuffle(&mut rng);
            *tags.tags_mut(cat) = labels.into_iter().take(count).map(String::from).collect();
        }
        tags
    }
}

const SUBJECTS: &[&str] = &[
    "A close-up of the product",
    "A person unboxing the package",
    "Hands demonstrating the main feature",
    "A smiling customer",
    "The product on a kitchen counter",
    "A side-by-side comparison",
];

const ACTIONS: &[&str] = &[
    "under soft daylight.",
    "while text highlights the price.",
    "with a slow camera pan.",
    "in a bright studio.",
    "as the logo appears.",
];

const SCRIPT_LINES: &[&str] = &[
    "Meet the upgrade your mornings were waiting for.",
    "It sets up in seconds and works every time.",
    "Thousands of families already made the switch.",
    "Built to last with materials you can trust.",
    "Order today and get free shipping.",
    "Small price, big difference.",
];

fn reply(status: u16, body: Value) -> HttpReply {
    HttpReply {
        status,
        body: serde_json::to_vec(&body).expect("value serializes"),
    }
}

fn revise(prompt: &FreePrompt) -> FreePrompt {
    let mut dimensions = prompt.dimensions.clone();
    if let Some(v) = dimensions.values_mut().next() {
        v.push_str(" Keep it concise.");
    }
    let text = render_prompt_text(&dimensions);
    FreePrompt { dimensions, text }
}

fn synth_analysis(dec: &Deconstruction) -> Analysis {
    let tags = &dec.recommended_tags;
    let joined = |cat: TagCategory| {
        let t = tags.tags(cat);
        (!t.is_empty()).then(|| t.join(", "))
    };
    let seconds = (dec.duration_ms + 500) / 1000;
    let mut a = BTreeMap::new();
    a.insert(Dimension::Duration, Some(format!("About {seconds} seconds.")));
    a.insert(
        Dimension::VisualStoryline,
        (!dec.shot_captions.is_empty()).then(|| dec.shot_captions.join(" Then ")),
    );
    a.insert(
        Dimension::TargetAudience,
        Some("Busy adults shopping online.".to_string()),
    );
    a.insert(
        Dimension::ScriptRoutine,
        Some("Open with a problem, show the product solving it, close with an offer.".to_string()),
    );
    a.insert(
        Dimension::SellingPointsEmphasis,
        dec.asr_sentences
            .first()
            .map(|s| format!("Stress this line: {}", s.text)),
    );
    a.insert(
        Dimension::Avatar,
        joined(TagCategory::Avatar).map(|t| format!("Presenter: {t}.")),
    );
    a.insert(
        Dimension::TtsTimbre,
        joined(TagCategory::Tts).map(|t| format!("Voice: {t}.")),
    );
    a.insert(
        Dimension::MusicStyle,
        joined(TagCategory::Music).map(|t| format!("Music: {t}.")),
    );
    a
}

/// Applies one corruption in place; a no-op when the draft offers nothing to
/// corrupt.
pub fn apply_corruption(draft: &mut Draft, kind: Corruption, negatives: &[u32], rng: &mut impl Rng) {
    match kind {
        Corruption::None => {}
        Corruption::SwapAdjacent => {
            let nodes = &mut draft.video_nodes_track;
            if nodes.len() >= 2 {
                let k = rng.random_range(0..nodes.len() - 1);
                let (a, b) = (nodes[k].index, nodes[k + 1].index);
                nodes[k].index = b;
                nodes[k + 1].index = a;
                nodes[k].source_start = TimeMs::ZERO;
                nodes[k + 1].source_start = TimeMs::ZERO;
            }
        }
        Corruption::InjectNegative => {
            if let (Some(&neg), false) = (negatives.choose(rng), draft.video_nodes_track.is_empty()) {
                let k = rng.random_range(0..draft.video_nodes_track.len());
                draft.video_nodes_track[k].index = neg;
                draft.video_nodes_track[k].source_start = TimeMs::ZERO;
            }
        }
        Corruption::DropTag => {
            let slots: Vec<(TagCategory, usize)> = TagCategory::ALL
                .into_iter()
                .flat_map(|c| (0..draft.decoration_setting.tags(c).len()).map(move |i| (c, i)))
                .collect();
            if let Some(&(cat, i)) = slots.choose(rng) {
                draft.decoration_setting.tags_mut(cat).remove(i);
            }
        }
    }
}

impl Transport for MockBackend {
    fn post(
        &self,
        url: &str,
        body: &[u8],
        _bearer: Option<&str>,
        _timeout: Duration,
    ) -> Result<HttpReply, TransportFailure> {
        let role = url.rsplit_once("/v1/").map(|(_, r)| r).unwrap_or_default();
        Ok(self.handle(role, body))
    }
}
