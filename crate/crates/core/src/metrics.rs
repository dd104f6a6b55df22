//! Evaluation metrics.
//!
//! CRA, CSA and DTPR are exact counts over a corpus. FPF and SQ aggregate
//! judge scores under fixed per-key caps. VSR is a simplified embedding
//! similarity between the script and the selected frames.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::backends::{api, BackendClient, BackendError, EmbedInput, FrameRef, Rubric};
use crate::dataset::types::{DatasetSample, Dimension, FreePrompt, ProductInfo};
use crate::draft::{parse_draft, serialize_draft, Draft};
use crate::taxonomy::{TagCategory, TagTaxonomy};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("sample {sample_id}: unknown {category} tag `{tag}`")]
    UnknownTag {
        sample_id: u64,
        category: &'static str,
        tag: String,
    },
    #[error("score for {key} is {value}, outside [0, {cap}]")]
    ScoreOutOfRange { key: String, value: f64, cap: f64 },
    #[error("no dimension to score")]
    NoDimensions,
    #[error("nothing to compare: {0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// One prediction paired with its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    pub sample_id: u64,
    /// `None` when the model output did not parse as a draft.
    pub predicted: Option<Draft>,
    pub ground_truth: Draft,
    pub negatives: BTreeSet<u32>,
}

impl EvalSample {
    pub fn new(
        sample_id: u64,
        predicted: Option<Draft>,
        ground_truth: Draft,
        negatives: impl IntoIterator<Item = u32>,
    ) -> Self {
        Self {
            sample_id,
            predicted,
            ground_truth,
            negatives: negatives.into_iter().collect(),
        }
    }

    /// Pairs a corpus sample with raw model output.
    pub fn from_prediction(sample: &DatasetSample, draft_json: &str) -> Self {
        Self::new(
            sample.sample_id,
            parse_draft(draft_json.as_bytes()).ok(),
            sample.ground_truth.clone(),
            sample.negatives.iter().copied(),
        )
    }

    /// Same selection in the same order.
    pub fn is_correct_order(&self) -> bool {
        self.predicted
            .as_ref()
            .is_some_and(|p| p.clip_indices() == self.ground_truth.clip_indices())
    }

    /// No negative clip selected.
    pub fn is_clean_selection(&self) -> bool {
        self.predicted
            .as_ref()
            .is_some_and(|p| p.video_nodes_track.iter().all(|n| !self.negatives.contains(&n.index)))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TagCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl TagCounts {
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| 100.0 * self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| 100.0 * self.tp as f64 / d as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MetricCounts {
    pub n_total: u64,
    pub n_correct: u64,
    pub n_select: u64,
    pub tts: TagCounts,
    pub avatar: TagCounts,
    pub music: TagCounts,
}

impl MetricCounts {
    pub fn tags(&self, cat: TagCategory) -> &TagCounts {
        match cat {
            TagCategory::Tts => &self.tts,
            TagCategory::Avatar => &self.avatar,
            TagCategory::Music => &self.music,
        }
    }

    fn tags_mut(&mut self, cat: TagCategory) -> &mut TagCounts {
        match cat {
            TagCategory::Tts => &mut self.tts,
            TagCategory::Avatar => &mut self.avatar,
            TagCategory::Music => &mut self.music,
        }
    }
}

/// Counts every sample. Tags are compared as sets per category; an
/// unparseable prediction contributes its reference tags as false negatives.
pub fn count(corpus: &[EvalSample]) -> MetricCounts {
    let mut c = MetricCounts {
        n_total: corpus.len() as u64,
        ..Default::default()
    };
    for s in corpus {
        c.n_correct += s.is_correct_order() as u64;
        c.n_select += s.is_clean_selection() as u64;
        for cat in TagCategory::ALL {
            let truth: BTreeSet<&str> = s
                .ground_truth
                .decoration_setting
                .tags(cat)
                .iter()
                .map(String::as_str)
                .collect();
            let pred: BTreeSet<&str> = s
                .predicted
                .as_ref()
                .map(|p| p.decoration_setting.tags(cat).iter().map(String::as_str).collect())
                .unwrap_or_default();
            let tp = pred.intersection(&truth).count() as u64;
            let t = c.tags_mut(cat);
            t.tp += tp;
            t.fp += pred.len() as u64 - tp;
            t.fn_ += truth.len() as u64 - tp;
        }
    }
    c
}

fn percent(num: u64, den: u64) -> f64 {
    100.0 * num as f64 / den as f64
}

/// Percent of samples whose selected clips and order match exactly.
pub fn cra(corpus: &[EvalSample]) -> Result<f64, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let c = count(corpus);
    Ok(percent(c.n_correct, c.n_total))
}

/// Percent of samples selecting no negative clip.
pub fn csa(corpus: &[EvalSample]) -> Result<f64, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let c = count(corpus);
    Ok(percent(c.n_select, c.n_total))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryScore {
    pub category: &'static str,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DtprReport {
    pub categories: Vec<CategoryScore>,
    /// Unweighted mean over categories where the value is defined.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Macro average of per-category values.
pub fn macro_average(categories: &[CategoryScore]) -> (Option<f64>, Option<f64>) {
    (
        mean_defined(categories.iter().map(|c| c.precision)),
        mean_defined(categories.iter().map(|c| c.recall)),
    )
}

fn check_tags(sample_id: u64, draft: &Draft, tax: &TagTaxonomy) -> Result<(), MetricsError> {
    for cat in TagCategory::ALL {
        if let Some(tag) = draft
            .decoration_setting
            .tags(cat)
            .iter()
            .find(|t| !tax.contains(cat, t))
        {
            return Err(MetricsError::UnknownTag {
                sample_id,
                category: cat.as_str(),
                tag: tag.clone(),
            });
        }
    }
    Ok(())
}

/// Tag precision and recall per category, micro-counted over the corpus.
pub fn dtpr(corpus: &[EvalSample], tax: &TagTaxonomy) -> Result<DtprReport, MetricsError> {
    if corpus.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    for s in corpus {
        check_tags(s.sample_id, &s.ground_truth, tax)?;
        if let Some(p) = &s.predicted {
            check_tags(s.sample_id, p, tax)?;
        }
    }
    Ok(dtpr_from_counts(&count(corpus)))
}

pub fn dtpr_from_counts(c: &MetricCounts) -> DtprReport {
    let categories: Vec<CategoryScore> = TagCategory::ALL
        .into_iter()
        .map(|cat| CategoryScore {
            category: cat.report_name(),
            precision: c.tags(cat).precision(),
            recall: c.tags(cat).recall(),
        })
        .collect();
    let (precision, recall) = macro_average(&categories);
    DtprReport {
        categories,
        precision,
        recall,
    }
}

/// Score cap of each free-prompt dimension; the caps sum to 100.
pub fn fpf_weight(d: Dimension) -> f64 {
    match d {
        Dimension::Duration => 10.0,
        Dimension::VisualStoryline => 20.0,
        Dimension::TargetAudience => 10.0,
        Dimension::ScriptRoutine => 10.0,
        Dimension::SellingPointsEmphasis => 20.0,
        Dimension::Avatar => 10.0,
        Dimension::TtsTimbre => 10.0,
        Dimension::MusicStyle => 10.0,
    }
}

/// Sum of the scores of the dimensions present, rescaled so that full marks
/// on those dimensions give 100.
pub fn fpf_aggregate(scores: &BTreeMap<Dimension, f64>) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::NoDimensions);
    }
    let mut sum = 0.0;
    let mut weight = 0.0;
    for (&d, &v) in scores {
        let cap = fpf_weight(d);
        if !(0.0..=cap).contains(&v) {
            return Err(MetricsError::ScoreOutOfRange {
                key: d.key().to_string(),
                value: v,
                cap,
            });
        }
        sum += v;
        weight += cap;
    }
    Ok(100.0 * sum / weight)
}

/// Script-quality category scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqScores {
    pub basic: f64,
    pub native_language_tone: f64,
    pub touch_the_audience: f64,
    pub creative_narrative: f64,
}

pub const SQ_CAPS: [(&str, f64); 4] = [
    ("basic", 30.0),
    ("native_language_tone", 15.0),
    ("touch_the_audience", 15.0),
    ("creative_narrative", 40.0),
];

/// Plain sum; every category always applies.
pub fn sq_aggregate(s: &SqScores) -> Result<f64, MetricsError> {
    let values = [
        s.basic,
        s.native_language_tone,
        s.touch_the_audience,
        s.creative_narrative,
    ];
    for ((key, cap), v) in SQ_CAPS.iter().zip(values) {
        if !(0.0..=*cap).contains(&v) {
            return Err(MetricsError::ScoreOutOfRange {
                key: key.to_string(),
                value: v,
                cap: *cap,
            });
        }
    }
    Ok(values.iter().sum())
}

/// Judge FPF for one prediction; dimensions absent from the prompt are not
/// scored, and present dimensions the judge skipped score 0.
pub fn score_fpf(
    judge: &BackendClient,
    rubric: &Rubric,
    prompt: &FreePrompt,
    draft: &Draft,
) -> Result<f64, MetricsError> {
    let payload = json!({
        "free_prompt": prompt,
        "draft": serde_json::from_slice::<serde_json::Value>(&serialize_draft(draft)).expect("draft is JSON"),
    });
    let judged = api::judge_score(judge, rubric, &payload)?;
    let scores: BTreeMap<Dimension, f64> = prompt
        .dimensions
        .keys()
        .map(|&d| (d, judged.scores.get(d.key()).copied().unwrap_or(0.0)))
        .collect();
    fpf_aggregate(&scores)
}

/// Judge SQ for one prediction; categories the judge skipped score 0.
pub fn score_sq(
    judge: &BackendClient,
    rubric: &Rubric,
    product: &ProductInfo,
    draft: &Draft,
) -> Result<f64, MetricsError> {
    let payload = json!({
        "product": product,
        "script": draft.voice_over_track.iter().map(|s| s.text.as_str()).collect::<Vec<_>>(),
    });
    let judged = api::judge_score(judge, rubric, &payload)?;
    let get = |k: &str| judged.scores.get(k).copied().unwrap_or(0.0);
    sq_aggregate(&SqScores {
        basic: get("basic"),
        native_language_tone: get("native_language_tone"),
        touch_the_audience: get("touch_the_audience"),
        creative_narrative: get("creative_narrative"),
    })
}

/// Source of unit embedding vectors.
pub trait Embedder {
    fn embed(&self, inputs: &[EmbedInput]) -> Result<Vec<Vec<f64>>, BackendError>;
}

impl Embedder for BackendClient {
    fn embed(&self, inputs: &[EmbedInput]) -> Result<Vec<Vec<f64>>, BackendError> {
        api::embed(self, inputs)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// `100 · (cos(script, mean frame) + mean over sentences of max over frames
/// cos(sentence, frame)) / 2`.
pub fn vsr(sentences: &[String], frames: &[FrameRef], embedder: &impl Embedder) -> Result<f64, MetricsError> {
    if sentences.is_empty() {
        return Err(MetricsError::EmptyInput("no script sentences"));
    }
    if frames.is_empty() {
        return Err(MetricsError::EmptyInput("no frames"));
    }
    let script = sentences.iter().map(|s| s.trim()).collect::<Vec<_>>().join(" ");
    let mut inputs = Vec::with_capacity(1 + sentences.len() + frames.len());
    inputs.push(EmbedInput::Text(script));
    inputs.extend(sentences.iter().map(|s| EmbedInput::Text(s.clone())));
    inputs.extend(frames.iter().map(|f| EmbedInput::Frame(*f)));
    let vectors = embedder.embed(&inputs)?;
    let (script_v, rest) = vectors.split_first().expect("at least one vector");
    let (sentence_vs, frame_vs) = rest.split_at(sentences.len());

    let dim = script_v.len();
    let mut mean_frame = vec![0.0; dim];
    for f in frame_vs {
        for (m, x) in mean_frame.iter_mut().zip(f) {
            *m += x;
        }
    }
    mean_frame.iter_mut().for_each(|m| *m /= frame_vs.len() as f64);
    let global = cosine(script_v, &mean_frame);

    let local = sentence_vs
        .iter()
        .map(|s| frame_vs.iter().map(|f| cosine(s, f)).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / sentence_vs.len() as f64;
    Ok(100.0 * (global + local) / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub cra: f64,
    pub csa: f64,
    pub fpf: Option<f64>,
    pub vsr: Option<f64>,
    pub sq: Option<f64>,
    pub dtpr: DtprReport,
    pub counts: MetricCounts,
}

impl EvalReport {
    /// CRA, CSA and DTPR for a corpus; judge and embedding metrics unset.
    pub fn from_corpus(corpus: &[EvalSample], tax: &TagTaxonomy) -> Result<Self, MetricsError> {
        let dtpr = dtpr(corpus, tax)?;
        let counts = count(corpus);
        Ok(Self {
            cra: percent(counts.n_correct, counts.n_total),
            csa: percent(counts.n_select, counts.n_total),
            fpf: None,
            vsr: None,
            sq: None,
            dtpr,
            counts,
        })
    }

    pub fn to_canonical_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("report serializes")
    }

    /// Aligned plain-text table: CRA, CSA, FPF, VSR, SQ, DTPR, then DTPR per
    /// category.
    pub fn to_table(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        let pr = |p: Option<f64>, r: Option<f64>| format!("{}/{}", f(p), f(r));
        let header = ["CRA", "CSA", "FPF", "VSR", "SQ", "DTPR"];
        let row = [
            f(Some(self.cra)),
            f(Some(self.csa)),
            f(self.fpf),
            f(self.vsr),
            f(self.sq),
            pr(self.dtpr.precision, self.dtpr.recall),
        ];
        let widths: Vec<usize> = header.iter().zip(&row).map(|(h, r)| h.len().max(r.len())).collect();
        let mut out = String::new();
        let line = |cells: &mut dyn Iterator<Item = String>| {
            cells
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        let _ = writeln!(out, "{}", line(&mut header.iter().map(|h| h.to_string())));
        let _ = writeln!(out, "{}", line(&mut row.iter().cloned()));
        let _ = writeln!(out);
        let name_w = self
            .dtpr
            .categories
            .iter()
            .map(|c| c.category.len())
            .max()
            .unwrap_or(0)
            .max(7);
        let _ = writeln!(out, "{:<name_w$}  {:>9}  {:>9}", "DTPR", "Precision", "Recall");
        for c in &self.dtpr.categories {
            let _ = writeln!(
                out,
                "{:<name_w$}  {:>9}  {:>9}",
                c.category,
                f(c.precision),
                f(c.recall)
            );
        }
        let _ = writeln!(
            out,
            "{:<name_w$}  {:>9}  {:>9}",
            "Average",
            f(self.dtpr.precision),
            f(self.dtpr.recall)
        );
        let _ = writeln!(
            out,
            "samples {}  correct order {}  clean selection {}",
            self.counts.n_total, self.counts.n_correct, self.counts.n_select
        );
        out
    }
}
