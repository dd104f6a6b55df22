use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use adcut_core::backends::{
    api, BackendClient, GenerationClip, GenerationRequest, MockFixtures, MockSample, Role, Rubric,
};
use adcut_core::dataset::{
    build_corpus, read_corpus, read_predictions, write_corpus, write_predictions, BuildConfig, DatasetSample,
    InstructionTemplate, PredictionLine, VideoRef,
};
use adcut_core::draft::parse_draft_with_warnings;
use adcut_core::metrics::{score_fpf, score_sq, vsr, EvalReport, EvalSample};
use adcut_core::sampling::{plan_request, SamplingError, SamplingPlan};
use adcut_core::timeline::{align_draft, build_render_plan, check_alignment, AssetCatalog, RenderPlan, TtsRealization};
use adcut_core::{parse_draft, validate_draft, ClipSet, Draft, SlowFastConfig, TagTaxonomy};
use rayon::prelude::*;
use serde_json::json;

use crate::exit::{self, Exit};
use crate::settings::Settings;
use crate::{Cli, Command, Format};

pub fn run(cli: Cli) -> Result<(), Exit> {
    let settings = Settings::resolve(&cli.global)?;
    match cli.command {
        Command::Validate { draft, clips, taxonomy } => {
            validate(&settings, &draft, clips.as_deref(), taxonomy.as_ref())
        }
        Command::Plan { clips } => plan(&settings, &clips),
        Command::BuildDataset { videos, out, dropout } => build_dataset(&settings, &videos, &out, dropout),
        Command::Generate { corpus, out, resume } => generate(&settings, &corpus, &out, resume),
        Command::Evaluate {
            corpus,
            predictions,
            with_judge,
            with_vsr,
        } => evaluate(&settings, &corpus, &predictions, with_judge, with_vsr),
        Command::Align {
            draft,
            tts,
            clips,
            catalog,
            taxonomy,
        } => align(&settings, &draft, &tts, &clips, catalog.as_ref(), taxonomy.as_ref()),
    }
}

fn emit(bytes: &[u8]) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(bytes);
    if !bytes.ends_with(b"\n") {
        let _ = out.write_all(b"\n");
    }
}

fn load_draft(path: &Path) -> Result<Draft, Exit> {
    let (draft, warnings) =
        parse_draft_with_warnings(&exit::read(path)?).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?;
    for w in warnings {
        eprintln!("adcut: warning: {} at {}", w.message, w.path);
    }
    Ok(draft)
}

fn load_clips(path: &Path) -> Result<ClipSet, Exit> {
    ClipSet::from_json(&exit::read(path)?).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))
}

fn load_corpus(path: &Path) -> Result<Vec<DatasetSample>, Exit> {
    read_corpus(&exit::read(path)?).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))
}

fn validate(settings: &Settings, draft: &Path, clips: Option<&Path>, taxonomy: Option<&PathBuf>) -> Result<(), Exit> {
    let draft = load_draft(draft)?;
    let clips = clips.map(load_clips).transpose()?;
    let tax = settings.taxonomy(taxonomy)?;
    let report = validate_draft(&draft, clips.as_ref(), &tax);
    match settings.format {
        Format::Json => {
            emit(&serde_json::to_vec(&json!({"valid": report.is_valid(), "violations": report.violations})).unwrap())
        }
        Format::Table => emit(report.to_table().as_bytes()),
    }
    if report.is_valid() {
        Ok(())
    } else {
        Err(Exit::silent_domain())
    }
}

fn sampling_exit(e: SamplingError) -> Exit {
    match e {
        SamplingError::CeilingUnsatisfiable { .. } => Exit::domain(e.to_string()),
        other => Exit::usage(other.to_string()),
    }
}

fn plan_table(plan: &SamplingPlan) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>5}  {:>10}  {:>11}  {:>11}  {:>11}  {:>11}",
        "clip", "duration_s", "fast_frames", "fast_tokens", "slow_frames", "slow_tokens"
    );
    for c in &plan.clips {
        let _ = writeln!(
            out,
            "{:>5}  {:>10}  {:>11}  {:>11}  {:>11}  {:>11}",
            c.index,
            c.duration_s,
            c.fast.frame_count(),
            c.e_fast(),
            c.slow.frame_count(),
            c.e_slow()
        );
    }
    let _ = writeln!(
        out,
        "total  fast {} frames / {} tokens  slow {} frames / {} tokens  fast fps {} (reduced x{})",
        plan.total_fast_frames,
        plan.total_fast_tokens,
        plan.total_slow_frames,
        plan.total_slow_tokens,
        plan.effective_fast_fps,
        plan.reduction_factor
    );
    out
}

fn plan(settings: &Settings, clips: &Path) -> Result<(), Exit> {
    let cfg = settings.sampling()?;
    let clips = load_clips(clips)?;
    if clips.is_empty() {
        return Err(Exit::usage("clip list is empty"));
    }
    let plan = plan_request(&clips, &cfg).map_err(sampling_exit)?;
    match settings.format {
        Format::Json => emit(&plan.to_canonical_json()),
        Format::Table => emit(plan_table(&plan).as_bytes()),
    }
    Ok(())
}

fn build_dataset(settings: &Settings, videos: &Path, out: &Path, dropout: Option<f64>) -> Result<(), Exit> {
    let seed = settings.require_seed()?;
    let template = match &settings.file.paths.template {
        Some(p) => InstructionTemplate::load(p).map_err(|e| Exit::usage(e.to_string()))?,
        None => InstructionTemplate::bundled(),
    };
    let videos: Vec<VideoRef> =
        serde_json::from_slice(&exit::read(videos)?).map_err(|e| Exit::usage(format!("{}: {e}", videos.display())))?;
    let backends = settings.backends(
        &[Role::Asr, Role::Ocr, Role::Shots, Role::Caption, Role::Judge],
        settings.mock_fixtures()?,
    )?;
    let cfg = BuildConfig {
        seed,
        dropout_p: dropout.unwrap_or(settings.dropout_p),
        sampling: settings.sampling()?,
        template,
        taxonomy: settings.taxonomy(None)?,
        concurrency: settings.concurrency,
    };
    let outcome = build_corpus(&videos, &backends, &cfg).map_err(|e| Exit::usage(e.to_string()))?;
    exit::write(out, &write_corpus(&outcome.samples))?;
    eprintln!("adcut: wrote {} samples to {}", outcome.samples.len(), out.display());
    if outcome.is_partial() {
        for f in &outcome.failures {
            let kind = if f.retryable { "retryable" } else { "permanent" };
            eprintln!(
                "adcut: video {} (sample {}) failed, {kind}: {}",
                f.video_id, f.sample_id, f.message
            );
        }
        return Err(Exit::domain(format!(
            "partial corpus: {} of {} videos failed",
            outcome.failures.len(),
            videos.len()
        )));
    }
    Ok(())
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, Exit> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Exit::usage(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn generation_request(sample: &DatasetSample, sampling: &SlowFastConfig) -> Result<GenerationRequest, SamplingError> {
    let clips = sample.clip_set();
    let plan = plan_request(&clips, sampling)?;
    Ok(GenerationRequest {
        sample_id: sample.sample_id,
        instruction: sample.instruction.clone(),
        product_info: sample.product.clone(),
        free_prompt: sample.free_prompt.clone(),
        clips: clips
            .iter()
            .zip(plan.clips)
            .map(|(meta, p)| GenerationClip::new(meta.clone(), p))
            .collect(),
    })
}

fn generate(settings: &Settings, corpus_path: &Path, out: &Path, resume: bool) -> Result<(), Exit> {
    let corpus = load_corpus(corpus_path)?;
    let sampling = settings.sampling()?;
    let mut fixtures: MockFixtures = settings.mock_fixtures()?;
    for s in &corpus {
        fixtures.samples.entry(s.sample_id).or_insert_with(|| MockSample {
            ground_truth: s.ground_truth.clone(),
            negatives: s.negatives.clone(),
        });
    }
    let backends = settings.backends(&[Role::Generate], fixtures)?;

    let mut done: BTreeMap<u64, PredictionLine> = BTreeMap::new();
    if resume && out.exists() {
        let existing =
            read_predictions(&exit::read(out)?).map_err(|e| Exit::usage(format!("{}: {e}", out.display())))?;
        done.extend(existing.into_iter().map(|l| (l.sample_id, l)));
    }
    let todo: Vec<&DatasetSample> = corpus.iter().filter(|s| !done.contains_key(&s.sample_id)).collect();
    let client = &backends.generate;
    let results: Vec<(u64, Result<PredictionLine, String>)> = with_pool(settings.concurrency, || {
        todo.par_iter()
            .map(|s| {
                let line = generation_request(s, &sampling)
                    .map_err(|e| e.to_string())
                    .and_then(|req| api::generate_draft(client, &req).map_err(|e| e.to_string()))
                    .and_then(|resp| {
                        String::from_utf8(resp.draft_json)
                            .map_err(|e| format!("draft is not UTF-8: {e}"))
                            .map(|draft_json| PredictionLine {
                                sample_id: s.sample_id,
                                draft_json,
                            })
                    });
                (s.sample_id, line)
            })
            .collect()
    })?;

    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(line) => {
                done.insert(id, line);
            }
            Err(e) => failures.push(format!("sample {id}: {e}")),
        }
    }
    let lines: Vec<PredictionLine> = corpus.iter().filter_map(|s| done.remove(&s.sample_id)).collect();
    exit::write(out, &write_predictions(&lines))?;
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("adcut: {f}");
        }
        return Err(Exit::domain(format!("{} samples failed", failures.len())));
    }
    Ok(())
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn load_rubric(settings: &Settings, id: &str) -> Result<Rubric, Exit> {
    match &settings.file.paths.prompts {
        Some(dir) => Rubric::load(dir, id),
        None => Rubric::bundled(id),
    }
    .map_err(|e| Exit::usage(e.to_string()))
}

fn judge_scores(
    samples: &[(&DatasetSample, Option<Draft>)],
    judge: &BackendClient,
    fpf: &Rubric,
    sq: &Rubric,
) -> Result<(Vec<f64>, Vec<f64>), String> {
    let per_sample: Vec<Result<(f64, f64), String>> = samples
        .par_iter()
        .map(|(s, pred)| match pred {
            None => Ok((0.0, 0.0)),
            Some(d) => {
                let f = score_fpf(judge, fpf, &s.free_prompt, d).map_err(|e| format!("sample {}: {e}", s.sample_id))?;
                let q = score_sq(judge, sq, &s.product, d).map_err(|e| format!("sample {}: {e}", s.sample_id))?;
                Ok((f, q))
            }
        })
        .collect();
    let mut fs = Vec::new();
    let mut qs = Vec::new();
    for r in per_sample {
        let (f, q) = r?;
        fs.push(f);
        qs.push(q);
    }
    Ok((fs, qs))
}

fn vsr_scores(
    samples: &[(&DatasetSample, Option<Draft>)],
    embed: &BackendClient,
    sampling: &SlowFastConfig,
) -> Result<Vec<f64>, String> {
    samples
        .par_iter()
        .map(|(s, pred)| {
            let Some(d) = pred else { return Ok(0.0) };
            let plan = plan_request(&s.clip_set(), sampling).map_err(|e| e.to_string())?;
            let mut seen = BTreeSet::new();
            let frames: Vec<_> = d
                .video_nodes_track
                .iter()
                .filter(|n| seen.insert(n.index))
                .filter_map(|n| {
                    plan.clip(n.index)
                        .map(|c| GenerationClip::new(s.clips[n.index as usize].clone(), c.clone()))
                })
                .flat_map(|c| c.slow_frames)
                .collect();
            let sentences: Vec<String> = d.voice_over_track.iter().map(|v| v.text.clone()).collect();
            if frames.is_empty() || sentences.is_empty() {
                return Ok(0.0);
            }
            vsr(&sentences, &frames, embed).map_err(|e| format!("sample {}: {e}", s.sample_id))
        })
        .collect()
}

fn evaluate(
    settings: &Settings,
    corpus_path: &Path,
    preds_path: &Path,
    with_judge: bool,
    with_vsr: bool,
) -> Result<(), Exit> {
    let corpus = load_corpus(corpus_path)?;
    let preds = read_predictions(&exit::read(preds_path)?)
        .map_err(|e| Exit::usage(format!("{}: {e}", preds_path.display())))?;

    let mut by_id: BTreeMap<u64, &PredictionLine> = BTreeMap::new();
    let mut orphans = Vec::new();
    for p in &preds {
        if by_id.insert(p.sample_id, p).is_some() {
            orphans.push(format!("duplicate prediction for sample {}", p.sample_id));
        }
    }
    let corpus_ids: BTreeSet<u64> = corpus.iter().map(|s| s.sample_id).collect();
    orphans.extend(
        by_id
            .keys()
            .filter(|id| !corpus_ids.contains(id))
            .map(|id| format!("prediction {id} has no corpus sample")),
    );
    orphans.extend(
        corpus_ids
            .iter()
            .filter(|id| !by_id.contains_key(id))
            .map(|id| format!("sample {id} has no prediction")),
    );
    if !orphans.is_empty() {
        for o in &orphans {
            eprintln!("adcut: {o}");
        }
        return Err(Exit::domain(format!(
            "{} id mismatches between corpus and predictions",
            orphans.len()
        )));
    }

    let tax = settings.taxonomy(None)?;
    let eval: Vec<EvalSample> = corpus
        .iter()
        .map(|s| EvalSample::from_prediction(s, &by_id[&s.sample_id].draft_json))
        .collect();
    let mut report = EvalReport::from_corpus(&eval, &tax).map_err(|e| Exit::domain(e.to_string()))?;

    if with_judge || with_vsr {
        let needed: Vec<Role> = [(with_judge, Role::Judge), (with_vsr, Role::Embed)]
            .into_iter()
            .filter_map(|(on, r)| on.then_some(r))
            .collect();
        let backends = settings.backends(&needed, settings.mock_fixtures()?)?;
        let paired: Vec<(&DatasetSample, Option<Draft>)> = corpus
            .iter()
            .map(|s| (s, parse_draft(by_id[&s.sample_id].draft_json.as_bytes()).ok()))
            .collect();
        if with_judge {
            let fpf = load_rubric(settings, api::FREE_PROMPT_RUBRIC)?;
            let sq = load_rubric(settings, api::SCRIPT_QUALITY_RUBRIC)?;
            let (fs, qs) = with_pool(settings.concurrency, || {
                judge_scores(&paired, &backends.judge, &fpf, &sq)
            })?
            .map_err(Exit::domain)?;
            report.fpf = mean(&fs);
            report.sq = mean(&qs);
        }
        if with_vsr {
            let sampling = settings.sampling()?;
            let vs = with_pool(settings.concurrency, || vsr_scores(&paired, &backends.embed, &sampling))?
                .map_err(Exit::domain)?;
            report.vsr = mean(&vs);
        }
    }

    match settings.format {
        Format::Json => emit(&report.to_canonical_json()),
        Format::Table => emit(report.to_table().as_bytes()),
    }
    Ok(())
}

fn align_table(plan: &RenderPlan) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "voice");
    for s in &plan.voice_over_track {
        let _ = writeln!(out, "  {:>8} {:>8}  {}", s.target_start.0, s.target_end.0, s.text);
    }
    let _ = writeln!(out, "video");
    for n in &plan.video_nodes_track {
        let _ = writeln!(
            out,
            "  {:>8} {:>8}  clip {} from {}",
            n.target_start.0, n.target_end.0, n.index, n.source_start.0
        );
    }
    let _ = writeln!(out, "total {} ms", plan.total_duration.0);
    out
}

fn align(
    settings: &Settings,
    draft: &Path,
    tts: &Path,
    clips: &Path,
    catalog: Option<&PathBuf>,
    taxonomy: Option<&PathBuf>,
) -> Result<(), Exit> {
    let draft = load_draft(draft)?;
    let tts: TtsRealization =
        serde_json::from_slice(&exit::read(tts)?).map_err(|e| Exit::usage(format!("{}: {e}", tts.display())))?;
    let clips = load_clips(clips)?;
    let tax: TagTaxonomy = settings.taxonomy(taxonomy)?;
    let plan = match catalog.or(settings.file.paths.catalog.as_ref()) {
        Some(p) => {
            let catalog = AssetCatalog::from_json(&exit::read(p)?, &tax)
                .map_err(|e| Exit::usage(format!("{}: {e}", p.display())))?;
            build_render_plan(&draft, &tts, &clips, &catalog, settings.seed.unwrap_or(0))
        }
        None => align_draft(&draft, &tts, &clips),
    }
    .map_err(|e| Exit::domain(e.to_string()))?;
    let report = check_alignment(&plan);
    if !report.is_valid() {
        eprint!("{}", report.to_table());
        return Err(Exit::domain("render plan failed its own checks"));
    }
    match settings.format {
        Format::Json => emit(&plan.to_canonical_json()),
        Format::Table => emit(align_table(&plan).as_bytes()),
    }
    Ok(())
}
