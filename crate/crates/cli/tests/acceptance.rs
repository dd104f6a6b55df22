//! Acceptance suite: ten numbered criteria, each checked against an
//! independent oracle and a runtime bound. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use adcut_core::backends::mock::apply_corruption;
use adcut_core::backends::{
    api, Backends, Corruption, GenerationClip, GenerationRequest, MockBackend, MockFixtures, MockSample,
};
use adcut_core::compression::{pool_features, squeeze_queries, FeatureGrid, QueryBank};
use adcut_core::dataset::{sample_negative_count, Dimension, FreePrompt, ProductInfo};
use adcut_core::metrics::{cra, csa, dtpr, fpf_aggregate, fpf_weight, sq_aggregate, EvalSample, SqScores};
use adcut_core::sampling::{plan_clip, plan_request, sample_frames, SamplingError};
use adcut_core::timeline::{align_draft, check_alignment, TtsRealization};
use adcut_core::{
    parse_draft, serialize_draft, validate_draft, ClipMeta, ClipSet, DecorationSetting, Draft, SlowFastConfig,
    TagCategory, TagTaxonomy, VideoNode, VoiceSentence,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    }};
}

fn main() {
    let criteria: [(u32, &str, Duration, Check); 10] = [
        (
            1,
            "token budgets of the two pathways match",
            Duration::from_secs(1),
            token_budget_identity,
        ),
        (
            2,
            "clips shorter than one frame period sample the middle frame",
            Duration::from_secs(1),
            degenerate_branch,
        ),
        (
            3,
            "fast-path frames stay under the 600-frame ceiling",
            Duration::from_secs(5),
            frame_ceiling,
        ),
        (
            4,
            "negative clip counts follow the clamped rounded normal",
            Duration::from_secs(5),
            negative_sampling,
        ),
        (
            5,
            "CRA, CSA and DTPR equal a brute-force recount",
            Duration::from_secs(5),
            metric_oracles,
        ),
        (
            6,
            "FPF and SQ aggregator weights",
            Duration::from_secs(1),
            aggregator_weights,
        ),
        (7, "draft protocol round-trip", Duration::from_secs(5), draft_round_trip),
        (
            8,
            "alignment invariants and time-scaling homogeneity",
            Duration::from_secs(5),
            alignment_invariants,
        ),
        (
            9,
            "compression ops equal brute-force means",
            Duration::from_secs(1),
            compression_ops,
        ),
        (
            10,
            "end-to-end determinism of the mock pipeline",
            Duration::from_secs(30),
            end_to_end_determinism,
        ),
    ];

    // keep panic messages out of the report; they are folded into FAIL lines
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, limit, check) in criteria {
        let started = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let elapsed = started.elapsed();
        let result = result.and_then(|()| {
            if elapsed <= limit {
                Ok(())
            } else {
                Err(format!(
                    "took {:.3}s, limit {:.0}s",
                    elapsed.as_secs_f64(),
                    limit.as_secs_f64()
                ))
            }
        });
        match result {
            Ok(()) => println!("PASS  criterion {n:>2}: {name} ({:.3}s)", elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {n:>2}: {name} ({:.3}s): {why}", elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn clip(index: u32, duration_s: f64, native_fps: f64) -> ClipMeta {
    ClipMeta::new(index, duration_s, ((duration_s * native_fps).ceil() as u32).max(1)).unwrap()
}

// 1 ------------------------------------------------------------------------

fn token_budget_identity() -> Result<(), String> {
    let presets = [
        SlowFastConfig::preset_fast2_slow05(),
        SlowFastConfig::preset_fast2_slow0125(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for cfg in &presets {
        let min_t = 1.0 / cfg.slow.fps;
        for i in 0..1000 {
            let t = rng.random_range(min_t..=60.0);
            let plan = plan_clip(&clip(i, t, 30.0), cfg);
            let gap = plan.e_fast().abs_diff(plan.e_slow());
            ensure!(gap <= 64, "t={t}: e_fast={} e_slow={}", plan.e_fast(), plan.e_slow());
        }
        let eight = plan_clip(&clip(0, 8.0, 30.0), cfg);
        ensure!(
            eight.e_fast() == 64 && eight.e_slow() == 64,
            "t=8: e_fast={} e_slow={}",
            eight.e_fast(),
            eight.e_slow()
        );
    }
    Ok(())
}

// 2 ------------------------------------------------------------------------

fn degenerate_branch() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let f: f64 = rng.random_range(0.05..=30.0);
        // native fps L/t must stay within the clip model's [1, 240]
        let t = rng.random_range(1.0 / 240.0..1.0 / f);
        let l: u32 = rng.random_range((t.ceil() as u32).max(1)..=((240.0 * t).floor() as u32).max(1));
        let c = ClipMeta::new(0, t, l).unwrap();
        let got = sample_frames(&c, f);
        ensure!(got == vec![l / 2], "L={l} t={t} f={f}: {got:?}");
    }
    Ok(())
}

// 3 ------------------------------------------------------------------------

/// Frame count under the sampling rule, computed from scratch.
fn oracle_frames(t: f64, l: u32, fps: f64) -> usize {
    if t * fps < 1.0 {
        1
    } else {
        ((t * fps + 0.5).floor() as usize).clamp(1, l as usize)
    }
}

fn frame_ceiling() -> Result<(), String> {
    let cfg = SlowFastConfig::preset_fast2_slow05();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for set in 0..1000 {
        let n = if set % 10 == 0 {
            rng.random_range(590..=620)
        } else {
            rng.random_range(1..=120)
        };
        let clips: Vec<ClipMeta> = (0..n)
            .map(|i| {
                let t = if rng.random_bool(0.5) {
                    rng.random_range(0.05..2.0)
                } else {
                    rng.random_range(2.0..90.0)
                };
                clip(i, t, 30.0)
            })
            .collect();
        let set_clips = ClipSet::new(clips.clone()).unwrap();
        match plan_request(&set_clips, &cfg) {
            Err(SamplingError::CeilingUnsatisfiable { clip_count, .. }) => {
                ensure!(
                    n > 600 && clip_count == n as usize,
                    "set {set}: unsatisfiable with {n} clips"
                )
            }
            Err(e) => return Err(format!("set {set}: {e}")),
            Ok(plan) => {
                ensure!(n <= 600, "set {set}: {n} clips planned");
                ensure!(
                    plan.total_fast_frames <= 600,
                    "set {set}: {} frames",
                    plan.total_fast_frames
                );
                let total = |fps: f64| -> usize {
                    clips
                        .iter()
                        .map(|c| oracle_frames(c.duration_s, c.frame_count, fps))
                        .sum()
                };
                let mut factor = 1u64;
                while total(2.0 / factor as f64) > 600 {
                    factor *= 2;
                }
                ensure!(
                    plan.reduction_factor == factor,
                    "set {set}: factor {} vs {factor}",
                    plan.reduction_factor
                );
                ensure!(
                    plan.total_fast_frames == total(2.0 / factor as f64),
                    "set {set}: frame total differs"
                );
            }
        }
    }
    Ok(())
}

// 4 ------------------------------------------------------------------------

/// Values frozen from the Simpson oracle below.
const FROZEN_P0: f64 = 0.2397500610934768;
const FROZEN_MEAN: f64 = 2.7885709602698965;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn negative_sampling() -> Result<(), String> {
    let (mu, var) = (2.5f64, 8.0f64);
    let pdf = |x: f64| (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
    let lo = mu - 14.0 * var.sqrt();
    let p0 = simpson(pdf, lo, 0.5, 20_000);
    let mean: f64 = (1..60)
        .map(|k| k as f64 * simpson(pdf, k as f64 - 0.5, k as f64 + 0.5, 2_000))
        .sum();
    ensure!(
        (p0 - FROZEN_P0).abs() < 1e-9,
        "oracle P(0)={p0} drifted from frozen value"
    );
    ensure!(
        (mean - FROZEN_MEAN).abs() < 1e-9,
        "oracle mean={mean} drifted from frozen value"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let draws: Vec<u32> = (0..100_000).map(|_| sample_negative_count(&mut rng)).collect();
    let emp_mean = draws.iter().map(|&k| k as f64).sum::<f64>() / draws.len() as f64;
    let emp_p0 = draws.iter().filter(|&&k| k == 0).count() as f64 / draws.len() as f64;
    ensure!((emp_mean - mean).abs() <= 0.05, "mean {emp_mean} vs {mean}");
    ensure!((emp_p0 - p0).abs() <= 0.01, "P(0) {emp_p0} vs {p0}");
    Ok(())
}

// 5 ------------------------------------------------------------------------

fn all_labels(tax: &TagTaxonomy, cat: TagCategory) -> Vec<String> {
    let mut v: Vec<String> = tax.subcategories(cat).flat_map(|(_, l)| l.iter().cloned()).collect();
    v.sort();
    v.dedup();
    v
}

fn random_tags(rng: &mut ChaCha8Rng, labels: &[String], max: usize) -> Vec<String> {
    let k = rng.random_range(0..=max);
    labels.choose_multiple(rng, k).cloned().collect()
}

struct Synthetic {
    id: u64,
    clips: ClipSet,
    negatives: Vec<u32>,
    truth: Draft,
}

fn synthetic_corpus(n: u64, seed: u64, tax: &TagTaxonomy) -> Vec<Synthetic> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<Vec<String>> = TagCategory::ALL.iter().map(|&c| all_labels(tax, c)).collect();
    (0..n)
        .map(|id| {
            let positives: u32 = rng.random_range(2..=7);
            let negatives: u32 = rng.random_range(0..=4);
            let total = positives + negatives;
            let mut slots: Vec<u32> = (0..total).collect();
            slots.shuffle(&mut rng);
            let mut neg: Vec<u32> = slots[positives as usize..].to_vec();
            neg.sort();
            let mut t = 0;
            let nodes = slots[..positives as usize]
                .iter()
                .map(|&s| {
                    let span = rng.random_range(500..3000);
                    let node = VideoNode::new(s, t, t + span, 0);
                    t += span;
                    node
                })
                .collect();
            Synthetic {
                id,
                clips: ClipSet::new((0..total).map(|i| clip(i, 5.0, 30.0)).collect()).unwrap(),
                negatives: neg,
                truth: Draft {
                    voice_over_track: vec![VoiceSentence::new("Get yours today.", 0, t.min(2000))],
                    video_nodes_track: nodes,
                    decoration_setting: DecorationSetting {
                        tts_tags: random_tags(&mut rng, &labels[0], 3),
                        avatar_tags: random_tags(&mut rng, &labels[1], 4),
                        music_tags: random_tags(&mut rng, &labels[2], 2),
                    },
                },
            }
        })
        .collect()
}

fn request(s: &Synthetic) -> GenerationRequest {
    let plan = plan_request(&s.clips, &SlowFastConfig::preset_fast2_slow05()).unwrap();
    GenerationRequest {
        sample_id: s.id,
        instruction: "Edit an ad from these clips.".into(),
        product_info: ProductInfo {
            name: "Widget".into(),
            brand: "Acme".into(),
            price: "$5".into(),
            selling_points: vec!["sturdy".into()],
        },
        free_prompt: FreePrompt::from_dimensions([(Dimension::Duration, "about 15 s".to_string())].into()).unwrap(),
        clips: s
            .clips
            .iter()
            .zip(plan.clips)
            .map(|(m, p)| GenerationClip::new(m.clone(), p))
            .collect(),
    }
}

/// Predictions from the generation mock over its wire format.
fn mock_predictions(corpus: &[Synthetic], corruption: Corruption, rate: f64) -> Vec<EvalSample> {
    let mut fixtures = MockFixtures::default();
    for s in corpus {
        fixtures.samples.insert(
            s.id,
            MockSample {
                ground_truth: s.truth.clone(),
                negatives: s.negatives.clone(),
            },
        );
    }
    let backends = Backends::mock(
        MockBackend::new(11)
            .with_fixtures(fixtures)
            .with_corruption(corruption, rate),
    );
    corpus
        .iter()
        .map(|s| {
            let resp = api::generate_draft(&backends.generate, &request(s)).unwrap();
            EvalSample::new(
                s.id,
                parse_draft(&resp.draft_json).ok(),
                s.truth.clone(),
                s.negatives.iter().copied(),
            )
        })
        .collect()
}

struct Recount {
    cra: f64,
    csa: f64,
    per_category: Vec<(Option<f64>, Option<f64>)>,
    macro_pr: (Option<f64>, Option<f64>),
}

/// Metric values recomputed with plain loops over the raw samples.
fn recount(samples: &[EvalSample]) -> Recount {
    let n = samples.len() as u64;
    let mut correct = 0u64;
    let mut clean = 0u64;
    let mut tp = [0u64; 3];
    let mut fp = [0u64; 3];
    let mut fnn = [0u64; 3];
    for s in samples {
        let Some(p) = &s.predicted else {
            for (k, &cat) in TagCategory::ALL.iter().enumerate() {
                let mut seen: Vec<&String> = Vec::new();
                for t in s.ground_truth.decoration_setting.tags(cat) {
                    if !seen.contains(&t) {
                        seen.push(t);
                    }
                }
                fnn[k] += seen.len() as u64;
            }
            continue;
        };
        let same_len = p.video_nodes_track.len() == s.ground_truth.video_nodes_track.len();
        if same_len
            && p.video_nodes_track
                .iter()
                .zip(&s.ground_truth.video_nodes_track)
                .all(|(a, b)| a.index == b.index)
        {
            correct += 1;
        }
        let mut uses_negative = false;
        for node in &p.video_nodes_track {
            for &neg in &s.negatives {
                if node.index == neg {
                    uses_negative = true;
                }
            }
        }
        if !uses_negative {
            clean += 1;
        }
        for (k, &cat) in TagCategory::ALL.iter().enumerate() {
            let mut pred: Vec<&String> = Vec::new();
            for t in p.decoration_setting.tags(cat) {
                if !pred.contains(&t) {
                    pred.push(t);
                }
            }
            let mut truth: Vec<&String> = Vec::new();
            for t in s.ground_truth.decoration_setting.tags(cat) {
                if !truth.contains(&t) {
                    truth.push(t);
                }
            }
            let hits = pred.iter().filter(|t| truth.contains(t)).count() as u64;
            tp[k] += hits;
            fp[k] += pred.len() as u64 - hits;
            fnn[k] += truth.len() as u64 - hits;
        }
    }
    let ratio = |a: u64, b: u64| {
        if b == 0 {
            None
        } else {
            Some(100.0 * a as f64 / b as f64)
        }
    };
    let per_category: Vec<(Option<f64>, Option<f64>)> = (0..3)
        .map(|k| (ratio(tp[k], tp[k] + fp[k]), ratio(tp[k], tp[k] + fnn[k])))
        .collect();
    let avg = |vals: Vec<Option<f64>>| {
        let v: Vec<f64> = vals.into_iter().flatten().collect();
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    Recount {
        cra: 100.0 * correct as f64 / n as f64,
        csa: 100.0 * clean as f64 / n as f64,
        macro_pr: (
            avg(per_category.iter().map(|c| c.0).collect()),
            avg(per_category.iter().map(|c| c.1).collect()),
        ),
        per_category,
    }
}

fn metric_oracles() -> Result<(), String> {
    let tax = TagTaxonomy::default_taxonomy();
    let corpus = synthetic_corpus(200, 5, &tax);

    // seeded mix of corruptions, extra tags and unparseable outputs
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let labels: Vec<Vec<String>> = TagCategory::ALL.iter().map(|&c| all_labels(&tax, c)).collect();
    let mixed: Vec<EvalSample> = corpus
        .iter()
        .map(|s| {
            let mut d = s.truth.clone();
            let roll = rng.random_range(0..10);
            if roll == 0 {
                return EvalSample::new(s.id, None, s.truth.clone(), s.negatives.iter().copied());
            }
            for kind in [
                Corruption::SwapAdjacent,
                Corruption::InjectNegative,
                Corruption::DropTag,
            ] {
                if rng.random_bool(0.35) {
                    apply_corruption(&mut d, kind, &s.negatives, &mut rng);
                }
            }
            if rng.random_bool(0.3) {
                let k = rng.random_range(0..3);
                let extra = labels[k].choose(&mut rng).unwrap().clone();
                d.decoration_setting.tags_mut(TagCategory::ALL[k]).push(extra);
            }
            EvalSample::new(s.id, Some(d), s.truth.clone(), s.negatives.iter().copied())
        })
        .collect();

    let compare = |label: &str, samples: &[EvalSample]| -> Result<(), String> {
        let r = recount(samples);
        let got_cra = cra(samples).map_err(|e| e.to_string())?;
        let got_csa = csa(samples).map_err(|e| e.to_string())?;
        let got = dtpr(samples, &tax).map_err(|e| e.to_string())?;
        ensure!(got_cra == r.cra, "{label}: CRA {got_cra} vs recount {}", r.cra);
        ensure!(got_csa == r.csa, "{label}: CSA {got_csa} vs recount {}", r.csa);
        for (c, want) in got.categories.iter().zip(&r.per_category) {
            ensure!(
                (c.precision, c.recall) == *want,
                "{label}: {} {:?} vs {want:?}",
                c.category,
                (c.precision, c.recall)
            );
        }
        ensure!(
            (got.precision, got.recall) == r.macro_pr,
            "{label}: macro average differs"
        );
        Ok(())
    };
    compare("mixed", &mixed)?;

    let perfect = mock_predictions(&corpus, Corruption::None, 0.0);
    compare("perfect", &perfect)?;
    ensure!(
        cra(&perfect) == Ok(100.0) && csa(&perfect) == Ok(100.0),
        "perfect mock is not 100/100"
    );
    let d = dtpr(&perfect, &tax).map_err(|e| e.to_string())?;
    ensure!(
        (d.precision, d.recall) == (Some(100.0), Some(100.0)),
        "perfect DTPR {:?}",
        (d.precision, d.recall)
    );

    let swapped = mock_predictions(&corpus, Corruption::SwapAdjacent, 1.0);
    compare("swapped", &swapped)?;
    ensure!(cra(&swapped) == Ok(0.0), "swap CRA {:?}", cra(&swapped));
    ensure!(csa(&swapped) == Ok(100.0), "swap CSA {:?}", csa(&swapped));
    Ok(())
}

// 6 ------------------------------------------------------------------------

fn aggregator_weights() -> Result<(), String> {
    let full: BTreeMap<Dimension, f64> = Dimension::ALL.iter().map(|&d| (d, fpf_weight(d))).collect();
    ensure!(fpf_aggregate(&full) == Ok(100.0), "full FPF {:?}", fpf_aggregate(&full));
    let caps = SqScores {
        basic: 30.0,
        native_language_tone: 15.0,
        touch_the_audience: 15.0,
        creative_narrative: 40.0,
    };
    ensure!(sq_aggregate(&caps) == Ok(100.0), "full SQ {:?}", sq_aggregate(&caps));
    let partial = SqScores {
        basic: 20.0,
        native_language_tone: 10.0,
        touch_the_audience: 10.0,
        creative_narrative: 30.0,
    };
    ensure!(
        sq_aggregate(&partial) == Ok(70.0),
        "SQ(20,10,10,30) {:?}",
        sq_aggregate(&partial)
    );
    let two: BTreeMap<Dimension, f64> = [(Dimension::Duration, 5.0), (Dimension::MusicStyle, 10.0)].into();
    ensure!(
        fpf_aggregate(&two) == Ok(75.0),
        "renormalized FPF {:?}",
        fpf_aggregate(&two)
    );
    Ok(())
}

// 7 ------------------------------------------------------------------------

fn random_draft(rng: &mut ChaCha8Rng, clips: u32, labels: &[Vec<String>]) -> Draft {
    const WORDS: [&str; 8] = [
        "fresh",
        "deal",
        "today",
        "quiet",
        "\"bold\"",
        "café",
        "100%",
        "new\nline",
    ];
    let mut t = 0;
    let voice_over_track = (0..rng.random_range(1..=6))
        .map(|_| {
            let start = t + rng.random_range(0..500);
            t = start + rng.random_range(1..4000);
            let text: Vec<&str> = (0..rng.random_range(1..6))
                .map(|_| *WORDS.choose(rng).unwrap())
                .collect();
            VoiceSentence::new(text.join(" "), start, t)
        })
        .collect();
    let mut order: Vec<u32> = (0..clips).collect();
    order.shuffle(rng);
    let mut t = 0;
    let video_nodes_track = order[..rng.random_range(1..=clips as usize)]
        .iter()
        .map(|&i| {
            let span = rng.random_range(1..3000);
            let node = VideoNode::new(i, t, t + span, rng.random_range(0..1000));
            t += span;
            node
        })
        .collect();
    Draft {
        voice_over_track,
        video_nodes_track,
        decoration_setting: DecorationSetting {
            tts_tags: random_tags(rng, &labels[0], 3),
            avatar_tags: random_tags(rng, &labels[1], 5),
            music_tags: random_tags(rng, &labels[2], 2),
        },
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn draft_round_trip() -> Result<(), String> {
    let tax = TagTaxonomy::default_taxonomy();
    let labels: Vec<Vec<String>> = TagCategory::ALL.iter().map(|&c| all_labels(&tax, c)).collect();
    let clips = ClipSet::new((0..8).map(|i| clip(i, 30.0, 30.0)).collect()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..1000 {
        let d = random_draft(&mut rng, 8, &labels);
        let report = validate_draft(&d, Some(&clips), &tax);
        ensure!(report.is_valid(), "draft {i} is not valid:\n{}", report.to_table());
        let bytes = serialize_draft(&d);
        let back = parse_draft(&bytes).map_err(|e| format!("draft {i}: {e}"))?;
        ensure!(back == d, "draft {i}: parse(serialize(d)) != d");
        ensure!(
            serialize_draft(&back) == bytes,
            "draft {i}: canonical bytes not idempotent"
        );
    }

    let raw = std::fs::read(fixture("template_draft.json")).map_err(|e| e.to_string())?;
    let d = parse_draft(&raw).map_err(|e| format!("template: {e}"))?;
    let original: serde_json::Value = serde_json::from_slice(&raw).unwrap();
    let reserialized: serde_json::Value = serde_json::from_slice(&serialize_draft(&d)).unwrap();
    ensure!(original == reserialized, "template did not re-serialize losslessly");
    ensure!(
        validate_draft(&d, None, &tax).is_valid(),
        "template fixture does not validate"
    );
    Ok(())
}

// 8 ------------------------------------------------------------------------

fn scale_draft(d: &Draft, k: u64) -> Draft {
    let mut s = d.clone();
    for v in &mut s.voice_over_track {
        v.target_start.0 *= k;
        v.target_end.0 *= k;
    }
    for n in &mut s.video_nodes_track {
        n.target_start.0 *= k;
        n.target_end.0 *= k;
        n.source_start.0 *= k;
    }
    s
}

fn alignment_invariants() -> Result<(), String> {
    let tax = TagTaxonomy::default_taxonomy();
    let labels: Vec<Vec<String>> = TagCategory::ALL.iter().map(|&c| all_labels(&tax, c)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..1000 {
        let n_clips = rng.random_range(1..=8);
        let d = random_draft(&mut rng, n_clips, &labels);
        let tts = TtsRealization::from_millis((0..d.voice_over_track.len()).map(|_| rng.random_range(1..6000)));
        // generous clips so that stretching never runs out of footage
        let durations: Vec<f64> = (0..n_clips).map(|_| rng.random_range(40.0..80.0)).collect();
        let clips = ClipSet::new(
            durations
                .iter()
                .enumerate()
                .map(|(k, &t)| clip(k as u32, t, 25.0))
                .collect(),
        )
        .unwrap();

        let plan = align_draft(&d, &tts, &clips).map_err(|e| format!("triple {i}: {e}"))?;
        let report = check_alignment(&plan);
        ensure!(report.is_valid(), "triple {i}:\n{}", report.to_table());
        ensure!(
            plan.clip_indices() == d.clip_indices(),
            "triple {i}: clip order changed"
        );
        let voiced: u64 = plan
            .voice_over_track
            .iter()
            .map(|s| s.target_end.0 - s.target_start.0)
            .sum();
        ensure!(
            voiced == tts.total(),
            "triple {i}: voice {voiced} vs tts {}",
            tts.total()
        );

        let d2 = scale_draft(&d, 2);
        let tts2 = TtsRealization::from_millis(tts.0.iter().map(|t| t.0 * 2));
        let clips2 = ClipSet::new(
            clips
                .iter()
                .map(|c| ClipMeta::new(c.index, c.duration_s * 2.0, c.frame_count * 2).unwrap())
                .collect(),
        )
        .unwrap();
        let plan2 = align_draft(&d2, &tts2, &clips2).map_err(|e| format!("triple {i} scaled: {e}"))?;
        let mut expect = plan.clone();
        for v in &mut expect.voice_over_track {
            v.target_start.0 *= 2;
            v.target_end.0 *= 2;
        }
        for n in &mut expect.video_nodes_track {
            n.target_start.0 *= 2;
            n.target_end.0 *= 2;
            n.source_start.0 *= 2;
        }
        expect.total_duration.0 *= 2;
        ensure!(plan2 == expect, "triple {i}: scaling by 2 is not homogeneous");
    }
    Ok(())
}

// 9 ------------------------------------------------------------------------

fn compression_ops() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..100 {
        let (alpha, groups, dim) = (
            rng.random_range(1..=6),
            rng.random_range(1..=8),
            rng.random_range(1..=5),
        );
        let rows = alpha * groups;
        let q: Vec<f64> = (0..rows * dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let bank = QueryBank::new(rows, dim, q.clone()).unwrap();
        let out = squeeze_queries(&bank, alpha).map_err(|e| e.to_string())?;
        let mut want = vec![0.0; groups * dim];
        for g in 0..groups {
            for c in 0..dim {
                let mut s = 0.0;
                for r in g * alpha..(g + 1) * alpha {
                    s += q[r * dim + c];
                }
                want[g * dim + c] = s / alpha as f64;
            }
        }
        ensure!(out.data() == want.as_slice(), "instance {i}: squeeze differs");
        let ident = squeeze_queries(&bank, 1).unwrap();
        ensure!(ident.data() == q.as_slice(), "instance {i}: alpha=1 not identity");
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (m0, m1) = (mean(&q), mean(out.data()));
        ensure!(
            (m0 - m1).abs() <= 1e-12 * m0.abs(),
            "instance {i}: squeeze mean {m1} vs {m0}"
        );

        let p = rng.random_range(1..=4);
        let (h, w) = (p * rng.random_range(1..=5), p * rng.random_range(1..=5));
        let g: Vec<f64> = (0..h * w * dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let grid = FeatureGrid::new(h, w, dim, g.clone()).unwrap();
        let pooled = pool_features(&grid, p).map_err(|e| e.to_string())?;
        let (oh, ow) = (h / p, w / p);
        let mut want = vec![0.0; oh * ow * dim];
        for by in 0..oh {
            for bx in 0..ow {
                for c in 0..dim {
                    let mut s = 0.0;
                    for y in 0..p {
                        for x in 0..p {
                            s += g[((by * p + y) * w + bx * p + x) * dim + c];
                        }
                    }
                    want[(by * ow + bx) * dim + c] = s / (p * p) as f64;
                }
            }
        }
        ensure!(pooled.data() == want.as_slice(), "instance {i}: pooling differs");
        ensure!(
            pool_features(&grid, 1).unwrap().data() == g.as_slice(),
            "instance {i}: p=1 not identity"
        );
        let (m0, m1) = (mean(&g), mean(pooled.data()));
        ensure!(
            (m0 - m1).abs() <= 1e-12 * m0.abs(),
            "instance {i}: pooled mean {m1} vs {m0}"
        );
    }
    Ok(())
}

// 10 -----------------------------------------------------------------------

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_adcut"))
        .args(args)
        .env_remove("ADCUT_CONFIG")
        .env_remove("ADCUT_SEED")
        .env_remove("ADCUT_CONCURRENCY")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "adcut {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn pipeline_artifacts(dir: &Path, concurrency: &str) -> Result<[Vec<u8>; 3], String> {
    let cfg = fixture("config.toml");
    let videos = fixture("videos.json");
    let corpus = dir.join("corpus.jsonl");
    let preds = dir.join("predictions.jsonl");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let common = [
        "--config".to_string(),
        s(&cfg),
        "--seed".into(),
        "7".into(),
        "--concurrency".into(),
        concurrency.into(),
    ];
    let with = |rest: &[String]| -> Result<Vec<u8>, String> {
        let all: Vec<&str> = common.iter().chain(rest).map(String::as_str).collect();
        run_cli(&all)
    };
    with(&["build-dataset".into(), s(&videos), "--out".into(), s(&corpus)])?;
    with(&["generate".into(), s(&corpus), "--out".into(), s(&preds)])?;
    let report = with(&[
        "evaluate".into(),
        s(&corpus),
        s(&preds),
        "--with-judge".into(),
        "--with-vsr".into(),
    ])?;
    Ok([
        std::fs::read(&corpus).map_err(|e| e.to_string())?,
        std::fs::read(&preds).map_err(|e| e.to_string())?,
        report,
    ])
}

fn end_to_end_determinism() -> Result<(), String> {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let first = pipeline_artifacts(dirs[0].path(), "1")?;
    let second = pipeline_artifacts(dirs[1].path(), "1")?;
    let wide = pipeline_artifacts(dirs[2].path(), "8")?;
    let names = ["corpus", "predictions", "evaluation report"];
    for k in 0..3 {
        ensure!(first[k] == second[k], "{} differs between two runs", names[k]);
        ensure!(first[k] == wide[k], "{} differs between concurrency 1 and 8", names[k]);
    }
    ensure!(!first[0].is_empty() && !first[1].is_empty(), "empty artifacts");
    Ok(())
}
