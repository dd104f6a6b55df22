//! TOML configuration file. Relative paths resolve against the file's
//! directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::exit::Exit;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub dropout_p: Option<f64>,
    pub concurrency: Option<usize>,
    #[serde(default)]
    pub paths: Paths,
    /// Keyed by role name.
    #[serde(default)]
    pub endpoints: BTreeMap<String, EndpointConfig>,
    #[serde(default)]
    pub mock: MockConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub taxonomy: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub mock_fixtures: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// `mock` selects the in-process mock.
    pub base_url: String,
    pub timeout_ms: Option<u64>,
    pub max_retries: Option<u32>,
    pub token_env: Option<String>,
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockConfig {
    pub corruption: Option<String>,
    pub corruption_rate: Option<f64>,
    pub verify_mode: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Exit> {
        let text = std::fs::read_to_string(path).map_err(|e| Exit::usage(format!("config {}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| Exit::usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let p = &mut cfg.paths;
        for slot in [
            &mut p.taxonomy,
            &mut p.template,
            &mut p.prompts,
            &mut p.catalog,
            &mut p.mock_fixtures,
        ] {
            if let Some(rel) = slot.as_ref().filter(|r| r.is_relative()) {
                *slot = Some(base.join(rel));
            }
        }
        for (name, slot) in [
            ("taxonomy", &p.taxonomy),
            ("template", &p.template),
            ("prompts", &p.prompts),
            ("catalog", &p.catalog),
            ("mock_fixtures", &p.mock_fixtures),
        ] {
            if let Some(path) = slot {
                if !path.exists() {
                    return Err(Exit::usage(format!(
                        "config paths.{name}: {} does not exist",
                        path.display()
                    )));
                }
            }
        }
        Ok(cfg)
    }
}
