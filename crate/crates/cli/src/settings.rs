//! Effective settings: command-line flag, then environment (both handled by
//! clap), then config file, then built-in default.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use adcut_core::backends::mock::MOCK_BASE_URL;
use adcut_core::backends::{
    BackendClient, BackendEndpoint, Backends, Corruption, HttpReply, MockBackend, MockFixtures, Role, Transport,
    TransportFailure, VerifyMode,
};
use adcut_core::dataset::prompt::DEFAULT_DROPOUT;
use adcut_core::{SlowFastConfig, TagTaxonomy};

use crate::config::{EndpointConfig, FileConfig};
use crate::exit::{self, Exit};
use crate::{Format, GlobalArgs};

pub const DEFAULT_CONCURRENCY: usize = 8;

pub struct Settings {
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub format: Format,
    pub concurrency: usize,
    pub dropout_p: f64,
    pub file: FileConfig,
    endpoint_flags: [(Role, Option<String>); 7],
}

impl Settings {
    pub fn resolve(args: &GlobalArgs) -> Result<Self, Exit> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let concurrency = args.concurrency.or(file.concurrency).unwrap_or(DEFAULT_CONCURRENCY);
        if concurrency == 0 {
            return Err(Exit::usage("concurrency must be at least 1"));
        }
        Ok(Self {
            seed: args.seed.or(file.seed),
            preset: args.preset.clone().or_else(|| file.preset.clone()),
            format: args.format,
            concurrency,
            dropout_p: file.dropout_p.unwrap_or(DEFAULT_DROPOUT),
            endpoint_flags: [
                (Role::Generate, args.endpoint_generate.clone()),
                (Role::Judge, args.endpoint_judge.clone()),
                (Role::Embed, args.endpoint_embed.clone()),
                (Role::Asr, args.endpoint_asr.clone()),
                (Role::Ocr, args.endpoint_ocr.clone()),
                (Role::Shots, args.endpoint_shots.clone()),
                (Role::Caption, args.endpoint_caption.clone()),
            ],
            file,
        })
    }

    pub fn require_seed(&self) -> Result<u64, Exit> {
        self.seed
            .ok_or_else(|| Exit::usage("this command needs an explicit seed (--seed, ADCUT_SEED or config)"))
    }

    pub fn sampling(&self) -> Result<SlowFastConfig, Exit> {
        match &self.preset {
            Some(p) => p.parse().map_err(|e| Exit::usage(format!("preset: {e}"))),
            None => Ok(SlowFastConfig::preset_fast2_slow05()),
        }
    }

    pub fn taxonomy(&self, flag: Option<&PathBuf>) -> Result<TagTaxonomy, Exit> {
        match flag.or(self.file.paths.taxonomy.as_ref()) {
            Some(p) => TagTaxonomy::load(p).map_err(|e| Exit::usage(format!("taxonomy: {e}"))),
            None => Ok(TagTaxonomy::default_taxonomy()),
        }
    }

    pub fn mock_fixtures(&self) -> Result<MockFixtures, Exit> {
        match &self.file.paths.mock_fixtures {
            Some(p) => serde_json::from_slice(&exit::read(p)?)
                .map_err(|e| Exit::usage(format!("mock fixtures {}: {e}", p.display()))),
            None => Ok(MockFixtures::default()),
        }
    }

    fn mock(&self, fixtures: MockFixtures) -> Result<MockBackend, Exit> {
        let m = &self.file.mock;
        let corruption: Corruption = match &m.corruption {
            Some(c) => c
                .parse()
                .map_err(|e: String| Exit::usage(format!("mock.corruption: {e}")))?,
            None => Corruption::None,
        };
        let rate = m
            .corruption_rate
            .unwrap_or(if corruption == Corruption::None { 0.0 } else { 1.0 });
        if !(0.0..=1.0).contains(&rate) {
            return Err(Exit::usage("mock.corruption_rate must be within [0, 1]"));
        }
        let verify = match m.verify_mode.as_deref() {
            None | Some("approve") => VerifyMode::Approve,
            Some("always_revise") => VerifyMode::AlwaysRevise,
            Some("invalid_revision") => VerifyMode::InvalidRevision,
            Some(other) => return Err(Exit::usage(format!("mock.verify_mode: unknown `{other}`"))),
        };
        Ok(MockBackend::new(self.seed.unwrap_or(0))
            .with_fixtures(fixtures)
            .with_corruption(corruption, rate)
            .with_verify_mode(verify))
    }

    fn endpoint_for(&self, role: Role) -> Option<(String, Option<&EndpointConfig>)> {
        let file = self.file.endpoints.get(role.as_str());
        let flag = self
            .endpoint_flags
            .iter()
            .find(|(r, _)| *r == role)
            .and_then(|(_, v)| v.clone());
        flag.or_else(|| file.map(|f| f.base_url.clone())).map(|url| (url, file))
    }

    /// Clients for every role. Roles in `needed` must be configured; others
    /// fail on first use.
    pub fn backends(&self, needed: &[Role], fixtures: MockFixtures) -> Result<Backends, Exit> {
        if let Some(bad) = self.file.endpoints.keys().find(|k| k.parse::<Role>().is_err()) {
            return Err(Exit::usage(format!("config endpoints: unknown role `{bad}`")));
        }
        let mock: Arc<dyn Transport> = Arc::new(self.mock(fixtures)?);
        let mut out = Vec::new();
        for role in Role::ALL {
            let client = match self.endpoint_for(role) {
                None if needed.contains(&role) => {
                    return Err(Exit::usage(format!(
                        "no endpoint for role `{role}` (use --endpoint-{role}, ADCUT_ENDPOINT_{} or the config)",
                        role.as_str().to_uppercase()
                    )))
                }
                None => BackendClient::new(
                    role,
                    BackendEndpoint::new("unconfigured://").with_retries(0),
                    Arc::new(Unconfigured),
                ),
                Some((url, file)) => {
                    let is_mock = url == "mock";
                    let mut ep = BackendEndpoint::new(if is_mock { MOCK_BASE_URL.to_string() } else { url });
                    if let Some(f) = file {
                        ep.timeout_ms = f.timeout_ms.unwrap_or(ep.timeout_ms);
                        ep.max_retries = f.max_retries.unwrap_or(ep.max_retries);
                        ep.token_env = f.token_env.clone();
                    }
                    let client = if is_mock {
                        BackendClient::new(role, ep, mock.clone())
                    } else {
                        BackendClient::http(role, ep)
                    };
                    client.map(|c| match file.and_then(|f| f.max_in_flight) {
                        Some(n) => c.with_max_in_flight(n),
                        None => c,
                    })
                }
            }
            .map_err(|e| Exit::usage(e.to_string()))?;
            out.push(client);
        }
        let mut it = out.into_iter();
        Ok(Backends::from_fn(|_| it.next().expect("one client per role")))
    }
}

struct Unconfigured;

impl Transport for Unconfigured {
    fn post(&self, _: &str, _: &[u8], _: Option<&str>, _: Duration) -> Result<HttpReply, TransportFailure> {
        Err(TransportFailure::Connect("no endpoint configured".into()))
    }
}
