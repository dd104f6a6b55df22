//! Whole-corpus build over a list of source videos.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::backends::Backends;
use crate::sampling::SlowFastConfig;
use crate::taxonomy::TagTaxonomy;

use super::assemble::{assemble_sample, InstructionTemplate};
use super::deconstruct::deconstruct;
use super::prompt::{analyze_dimensions, generate_free_prompt, verify_free_prompt, DEFAULT_DROPOUT};
use super::types::{ClipSource, DatasetSample, Deconstruction, VideoRef};
use super::DatasetError;

#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub seed: u64,
    pub dropout_p: f64,
    pub sampling: SlowFastConfig,
    pub template: InstructionTemplate,
    pub taxonomy: TagTaxonomy,
    /// Worker threads; output never depends on it.
    pub concurrency: usize,
}

impl BuildConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            dropout_p: DEFAULT_DROPOUT,
            sampling: SlowFastConfig::preset_fast2_slow05(),
            template: InstructionTemplate::bundled(),
            taxonomy: TagTaxonomy::default_taxonomy(),
            concurrency: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoFailure {
    pub sample_id: u64,
    pub video_id: String,
    pub message: String,
    pub retryable: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BuildOutcome {
    /// In input order, failed videos skipped.
    pub samples: Vec<DatasetSample>,
    pub failures: Vec<VideoFailure>,
}

impl BuildOutcome {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Per-sample generator: corpus seed xor sample id.
pub fn sample_rng(seed: u64, sample_id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ sample_id)
}

fn failure(sample_id: u64, video_id: &str, err: DatasetError) -> VideoFailure {
    let retryable = matches!(&err, DatasetError::Backend(b) if b.is_retryable());
    VideoFailure {
        sample_id,
        video_id: video_id.to_string(),
        message: err.to_string(),
        retryable,
    }
}

/// Builds one sample per video; sample ids are input positions. Negatives for
/// a video come from the shots of every other successfully deconstructed
/// video.
pub fn build_corpus(videos: &[VideoRef], backends: &Backends, cfg: &BuildConfig) -> Result<BuildOutcome, DatasetError> {
    if !(0.0..1.0).contains(&cfg.dropout_p) {
        return Err(DatasetError::InvalidDropout(cfg.dropout_p));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.concurrency.max(1))
        .build()
        .map_err(|e| DatasetError::Io(std::io::Error::other(e)))?;

    pool.install(|| {
        let decs: Vec<Result<Deconstruction, DatasetError>> = videos
            .par_iter()
            .map(|v| deconstruct(v, backends, &cfg.taxonomy))
            .collect();

        let shots: Vec<Vec<ClipSource>> = decs
            .iter()
            .map(|d| match d {
                Ok(d) => (0..d.shot_count())
                    .map(|k| {
                        let (start_ms, end_ms) = d.shot(k);
                        ClipSource {
                            video_id: d.video_id.clone(),
                            start_ms,
                            end_ms,
                            native_fps: d.native_fps,
                        }
                    })
                    .collect(),
                Err(_) => Vec::new(),
            })
            .collect();

        let results: Vec<Result<DatasetSample, VideoFailure>> = decs
            .into_par_iter()
            .enumerate()
            .map(|(i, dec)| {
                let id = i as u64;
                let video = &videos[i];
                let dec = dec.map_err(|e| failure(id, &video.video_id, e))?;
                let negative_pool: Vec<ClipSource> = shots
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i && videos[*j].video_id != video.video_id)
                    .flat_map(|(_, s)| s.iter().cloned())
                    .collect();
                build_one(id, video, &dec, &negative_pool, backends, cfg).map_err(|e| failure(id, &video.video_id, e))
            })
            .collect();

        let mut outcome = BuildOutcome::default();
        for r in results {
            match r {
                Ok(s) => outcome.samples.push(s),
                Err(f) => outcome.failures.push(f),
            }
        }
        Ok(outcome)
    })
}

fn build_one(
    sample_id: u64,
    video: &VideoRef,
    dec: &Deconstruction,
    negative_pool: &[ClipSource],
    backends: &Backends,
    cfg: &BuildConfig,
) -> Result<DatasetSample, DatasetError> {
    let mut rng = sample_rng(cfg.seed, sample_id);
    let analysis = analyze_dimensions(dec, &backends.judge)?;
    let prompt = generate_free_prompt(&analysis, &mut rng, cfg.dropout_p)?;
    let verified = verify_free_prompt(&prompt, &analysis, &backends.judge)?;
    assemble_sample(
        sample_id,
        dec,
        &video.product,
        &verified.prompt,
        negative_pool,
        &cfg.sampling,
        &cfg.template,
        &mut rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::MockBackend;
    use crate::dataset::corpus::write_corpus;
    use crate::dataset::types::ProductInfo;

    fn videos() -> Vec<VideoRef> {
        (0..4)
            .map(|i| VideoRef {
                video_id: format!("v{i}"),
                uri: format!("file:///v{i}.mp4"),
                duration_ms: 9_000 + 1_500 * i,
                native_fps: [30.0, 25.0, 24.0, 60.0][i as usize],
                product: ProductInfo {
                    name: format!("Product {i}"),
                    brand: "Acme".into(),
                    price: "$9.99".into(),
                    selling_points: vec!["cheap".into()],
                },
            })
            .collect()
    }

    #[test]
    fn build_is_independent_of_concurrency() {
        let backends = Backends::mock(MockBackend::new(7));
        let mut cfg = BuildConfig::new(7);
        cfg.concurrency = 1;
        let a = build_corpus(&videos(), &backends, &cfg).unwrap();
        cfg.concurrency = 8;
        let b = build_corpus(&videos(), &backends, &cfg).unwrap();
        assert!(!a.is_partial());
        assert_eq!(a.samples.len(), 4);
        assert_eq!(write_corpus(&a.samples), write_corpus(&b.samples));
    }

    #[test]
    fn bad_video_is_reported_not_fatal() {
        let mut vs = videos();
        vs[1].native_fps = 0.5;
        let backends = Backends::mock(MockBackend::new(7));
        let out = build_corpus(&vs, &backends, &BuildConfig::new(7)).unwrap();
        assert_eq!(out.samples.len(), 3);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].video_id, "v1");
        assert!(!out.failures[0].retryable);
    }
}
