//! Typed requests and responses for each backend role.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::clips::ClipMeta;
use crate::dataset::types::{Analysis, AsrSegment, Deconstruction, Dimension, FreePrompt, ProductInfo, VideoRef};
use crate::draft::DecorationSetting;
use crate::sampling::ClipPlan;

use super::{BackendClient, BackendError, Role};

/// A sampled frame, referenced rather than transported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRef {
    pub clip_index: u32,
    pub frame_index: u32,
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationClip {
    pub meta: ClipMeta,
    pub plan: ClipPlan,
    pub fast_frames: Vec<FrameRef>,
    pub slow_frames: Vec<FrameRef>,
}

impl GenerationClip {
    pub fn new(meta: ClipMeta, plan: ClipPlan) -> Self {
        let refs = |p: &crate::sampling::PathwaySample| {
            p.frame_indices
                .iter()
                .zip(&p.timestamps)
                .map(|(&frame_index, &timestamp)| FrameRef {
                    clip_index: meta.index,
                    frame_index,
                    timestamp,
                })
                .collect()
        };
        let fast_frames = refs(&plan.fast);
        let slow_frames = refs(&plan.slow);
        Self {
            meta,
            plan,
            fast_frames,
            slow_frames,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationRequest {
    pub sample_id: u64,
    pub instruction: String,
    pub product_info: ProductInfo,
    pub free_prompt: FreePrompt,
    pub clips: Vec<GenerationClip>,
}

impl GenerationRequest {
    pub fn check(&self) -> Result<(), String> {
        if self.clips.is_empty() {
            return Err("clip list is empty".into());
        }
        for c in &self.clips {
            if c.plan.index != c.meta.index || c.plan.duration_s != c.meta.duration_s {
                return Err(format!("sampling plan does not match clip {}", c.meta.index));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationResponse {
    pub model_id: String,
    /// Draft bytes exactly as returned by the model.
    pub draft_json: Vec<u8>,
    pub latency_ms: u64,
    pub retries: u32,
}

#[derive(Deserialize)]
struct GenerationWire {
    model_id: String,
    draft_json: String,
}

fn invalid(role: Role, message: impl Into<String>) -> BackendError {
    BackendError::InvalidResponse {
        role,
        message: message.into(),
    }
}

fn invalid_request(role: Role, message: impl Into<String>) -> BackendError {
    BackendError::InvalidRequest {
        role,
        message: message.into(),
    }
}

pub fn generate_draft(client: &BackendClient, req: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
    req.check().map_err(|m| invalid_request(Role::Generate, m))?;
    let started = Instant::now();
    let (wire, outcome): (GenerationWire, _) = client.call_json(req)?;
    Ok(GenerationResponse {
        model_id: wire.model_id,
        draft_json: wire.draft_json.into_bytes(),
        latency_ms: started.elapsed().as_millis() as u64,
        retries: outcome.retries(),
    })
}

/// A judge prompt loaded verbatim, with its per-key score caps.
#[derive(Debug, Clone, PartialEq)]
pub struct Rubric {
    pub id: String,
    pub text: String,
    pub sha256: String,
    pub caps: IndexMap<String, f64>,
}

pub const FREE_PROMPT_RUBRIC: &str = "free_prompt_following";
pub const SCRIPT_QUALITY_RUBRIC: &str = "script_quality";

/// Score caps of the built-in rubrics.
pub fn rubric_caps(id: &str) -> Option<IndexMap<String, f64>> {
    let pairs: &[(&str, f64)] = match id {
        FREE_PROMPT_RUBRIC => &[
            ("duration", 10.0),
            ("visual_storyline", 20.0),
            ("target_audience", 10.0),
            ("script_routine", 10.0),
            ("selling_points_emphasis", 20.0),
            ("avatar", 10.0),
            ("tts_timbre", 10.0),
            ("music_style", 10.0),
        ],
        SCRIPT_QUALITY_RUBRIC => &[
            ("basic", 30.0),
            ("native_language_tone", 15.0),
            ("touch_the_audience", 15.0),
            ("creative_narrative", 40.0),
        ],
        _ => return None,
    };
    Some(pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect())
}

const BUNDLED_PROMPTS: &[(&str, &str)] = &[
    (
        FREE_PROMPT_RUBRIC,
        include_str!("../../data/prompts/free_prompt_following.txt"),
    ),
    (
        SCRIPT_QUALITY_RUBRIC,
        include_str!("../../data/prompts/script_quality.txt"),
    ),
];

impl Rubric {
    pub fn from_text(id: &str, text: String) -> Result<Self, BackendError> {
        let caps = rubric_caps(id).ok_or_else(|| BackendError::Config(format!("unknown rubric `{id}`")))?;
        let sha256 = hex::encode(Sha256::digest(text.as_bytes()));
        Ok(Self {
            id: id.to_string(),
            text,
            sha256,
            caps,
        })
    }

    /// Loads `{dir}/{id}.txt` byte for byte.
    pub fn load(dir: &Path, id: &str) -> Result<Self, BackendError> {
        let path = dir.join(format!("{id}.txt"));
        let text =
            std::fs::read_to_string(&path).map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Self::from_text(id, text)
    }

    /// The copy shipped with the crate.
    pub fn bundled(id: &str) -> Result<Self, BackendError> {
        let text = BUNDLED_PROMPTS
            .iter()
            .find(|(k, _)| *k == id)
            .map(|(_, t)| t.to_string())
            .ok_or_else(|| BackendError::Config(format!("unknown rubric `{id}`")))?;
        Self::from_text(id, text)
    }

    pub fn total(&self) -> f64 {
        self.caps.values().sum()
    }
}

/// Judge task selector; the body of every judge request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum JudgeRequest {
    Score {
        rubric_id: String,
        rubric_sha256: String,
        rubric: String,
        payload: Value,
    },
    RecommendTags {
        video_id: String,
        asr: Vec<AsrSegment>,
        ocr: Vec<String>,
        captions: Vec<String>,
    },
    CorrectAsr {
        video_id: String,
        sentences: Vec<String>,
    },
    Analyze {
        deconstruction: Deconstruction,
    },
    Verify {
        prompt: FreePrompt,
        analysis: Analysis,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeScores {
    pub rubric_id: String,
    pub rubric_sha256: String,
    pub scores: IndexMap<String, f64>,
}

#[derive(Deserialize)]
struct ScoresWire {
    scores: IndexMap<String, Value>,
}

/// Scores `payload` against `rubric`; every returned score must name a rubric
/// key and lie within `[0, cap]`.
pub fn judge_score(client: &BackendClient, rubric: &Rubric, payload: &Value) -> Result<JudgeScores, BackendError> {
    let req = JudgeRequest::Score {
        rubric_id: rubric.id.clone(),
        rubric_sha256: rubric.sha256.clone(),
        rubric: rubric.text.clone(),
        payload: payload.clone(),
    };
    let (wire, _): (ScoresWire, _) = client.call_json(&req)?;
    let mut scores = IndexMap::new();
    for (key, value) in wire.scores {
        let cap = rubric
            .caps
            .get(&key)
            .ok_or_else(|| BackendError::MalformedScores(format!("unknown key `{key}`")))?;
        let v = value
            .as_f64()
            .ok_or_else(|| BackendError::MalformedScores(format!("`{key}` is not a number")))?;
        if !(0.0..=*cap).contains(&v) {
            return Err(BackendError::MalformedScores(format!(
                "`{key}` = {v} outside [0, {cap}]"
            )));
        }
        scores.insert(key, v);
    }
    Ok(JudgeScores {
        rubric_id: rubric.id.clone(),
        rubric_sha256: rubric.sha256.clone(),
        scores,
    })
}

#[derive(Deserialize)]
struct TagsWire {
    tags: DecorationSetting,
}

pub fn recommend_tags(
    client: &BackendClient,
    video_id: &str,
    asr: &[AsrSegment],
    ocr: &[String],
    captions: &[String],
) -> Result<DecorationSetting, BackendError> {
    let req = JudgeRequest::RecommendTags {
        video_id: video_id.to_string(),
        asr: asr.to_vec(),
        ocr: ocr.to_vec(),
        captions: captions.to_vec(),
    };
    let (wire, _): (TagsWire, _) = client.call_json(&req)?;
    Ok(wire.tags)
}

#[derive(Deserialize)]
struct SentencesWire {
    sentences: Vec<String>,
}

/// Corrected text for each sentence, same count and order.
pub fn correct_asr(client: &BackendClient, video_id: &str, sentences: &[String]) -> Result<Vec<String>, BackendError> {
    let req = JudgeRequest::CorrectAsr {
        video_id: video_id.to_string(),
        sentences: sentences.to_vec(),
    };
    let (wire, _): (SentencesWire, _) = client.call_json(&req)?;
    if wire.sentences.len() != sentences.len() {
        return Err(invalid(
            Role::Judge,
            format!(
                "{} corrected sentences for {} inputs",
                wire.sentences.len(),
                sentences.len()
            ),
        ));
    }
    Ok(wire.sentences)
}

#[derive(Deserialize)]
struct AnalysisWire {
    analysis: BTreeMap<Dimension, Option<String>>,
}

/// Raw judge analysis; dimensions the judge omits are absent.
pub fn analyze(client: &BackendClient, dec: &Deconstruction) -> Result<Analysis, BackendError> {
    let req = JudgeRequest::Analyze {
        deconstruction: dec.clone(),
    };
    let (wire, _): (AnalysisWire, _) = client.call_json(&req)?;
    Ok(Dimension::ALL
        .into_iter()
        .map(|d| {
            let text = wire
                .analysis
                .get(&d)
                .cloned()
                .flatten()
                .filter(|t| !t.trim().is_empty());
            (d, text)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub approved: bool,
    #[serde(default)]
    pub revised: Option<FreePrompt>,
}

pub fn verify(client: &BackendClient, prompt: &FreePrompt, analysis: &Analysis) -> Result<Verdict, BackendError> {
    let req = JudgeRequest::Verify {
        prompt: prompt.clone(),
        analysis: analysis.clone(),
    };
    let (verdict, _): (Verdict, _) = client.call_json(&req)?;
    if !verdict.approved && verdict.revised.is_none() {
        return Err(invalid(Role::Judge, "rejected without a revision"));
    }
    Ok(verdict)
}

/// Anything the embedding role can embed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedInput {
    Text(String),
    Frame(FrameRef),
}

#[derive(Serialize)]
struct EmbedWireRequest<'a> {
    inputs: &'a [EmbedInput],
}

#[derive(Deserialize)]
struct EmbedWire {
    vectors: Vec<Vec<f64>>,
}

/// One unit vector per input. The first response fixes the endpoint's
/// dimension; later responses must match it.
pub fn embed(client: &BackendClient, inputs: &[EmbedInput]) -> Result<Vec<Vec<f64>>, BackendError> {
    if inputs.is_empty() {
        return Err(invalid_request(Role::Embed, "no inputs"));
    }
    let (wire, _): (EmbedWire, _) = client.call_json(&EmbedWireRequest { inputs })?;
    if wire.vectors.len() != inputs.len() {
        return Err(invalid(
            Role::Embed,
            format!("{} vectors for {} inputs", wire.vectors.len(), inputs.len()),
        ));
    }
    let dim = wire.vectors[0].len();
    if dim == 0 {
        return Err(invalid(Role::Embed, "empty vector"));
    }
    let expected = *client.embed_dim.get_or_init(|| dim);
    let mut out = Vec::with_capacity(wire.vectors.len());
    for v in wire.vectors {
        if v.len() != expected {
            return Err(BackendError::DimensionMismatch { expected, got: v.len() });
        }
        out.push(normalize(v).ok_or_else(|| invalid(Role::Embed, "zero or non-finite vector"))?);
    }
    Ok(out)
}

/// Scales `v` to unit L2 norm.
pub fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

#[derive(Serialize)]
struct VideoRequest<'a> {
    video_id: &'a str,
    uri: &'a str,
    duration_ms: u64,
    native_fps: f64,
}

impl<'a> From<&'a VideoRef> for VideoRequest<'a> {
    fn from(v: &'a VideoRef) -> Self {
        Self {
            video_id: &v.video_id,
            uri: &v.uri,
            duration_ms: v.duration_ms,
            native_fps: v.native_fps,
        }
    }
}

#[derive(Deserialize)]
struct AsrWire {
    segments: Vec<AsrSegment>,
}

pub fn asr(client: &BackendClient, video: &VideoRef) -> Result<Vec<AsrSegment>, BackendError> {
    let (wire, _): (AsrWire, _) = client.call_json(&VideoRequest::from(video))?;
    Ok(wire.segments)
}

#[derive(Deserialize)]
struct OcrWire {
    texts: Vec<String>,
}

pub fn ocr(client: &BackendClient, video: &VideoRef) -> Result<Vec<String>, BackendError> {
    let (wire, _): (OcrWire, _) = client.call_json(&VideoRequest::from(video))?;
    Ok(wire.texts)
}

#[derive(Deserialize)]
struct ShotsWire {
    cuts: Vec<u64>,
}

/// Raw cut times in milliseconds, as detected.
pub fn shots(client: &BackendClient, video: &VideoRef) -> Result<Vec<u64>, BackendError> {
    let (wire, _): (ShotsWire, _) = client.call_json(&VideoRequest::from(video))?;
    Ok(wire.cuts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub video_id: String,
    pub shot: u32,
    pub start_ms: u64,
    pub end_ms: u64,
    pub frames: Vec<FrameRef>,
}

#[derive(Deserialize)]
struct CaptionWire {
    caption: String,
}

pub fn caption(client: &BackendClient, req: &CaptionRequest) -> Result<String, BackendError> {
    let (wire, _): (CaptionWire, _) = client.call_json(req)?;
    Ok(wire.caption)
}
