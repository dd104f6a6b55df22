//! `adcut`: validate drafts, plan frame sampling, build corpora, run a draft
//! model, evaluate predictions and align drafts to TTS.

mod commands;
mod config;
mod exit;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "adcut", version, about = "Ad-video edit draft toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML config file.
    #[arg(long, global = true, env = "ADCUT_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "ADCUT_SEED")]
    pub seed: Option<u64>,
    /// Slow-fast preset, e.g. "fast:2/4 slow:0.5/16".
    #[arg(long, global = true, env = "ADCUT_PRESET")]
    pub preset: Option<String>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Worker threads for batch commands.
    #[arg(long, global = true, env = "ADCUT_CONCURRENCY")]
    pub concurrency: Option<usize>,
    #[arg(long, global = true, env = "ADCUT_ENDPOINT_GENERATE")]
    pub endpoint_generate: Option<String>,
    #[arg(long, global = true, env = "ADCUT_ENDPOINT_JUDGE")]
    pub endpoint_judge: Option<String>,
    #[arg(long, global = true, env = "ADCUT_ENDPOINT_EMBED")]
    pub endpoint_embed: Option<String>,
    #[arg(long, global = true, env = "ADCUT_ENDPOINT_ASR")]
    pub endpoint_asr: Option<String>,
    #[arg(long, global = true, env = "ADCUT_ENDPOINT_OCR")]
    pub endpoint_ocr: Option<String>,
    #[arg(long, global = true, env = "ADCUT_ENDPOINT_SHOTS")]
    pub endpoint_shots: Option<String>,
    #[arg(long, global = true, env = "ADCUT_ENDPOINT_CAPTION")]
    pub endpoint_caption: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a draft against the protocol rules.
    Validate {
        draft: PathBuf,
        /// Clip metadata to check indices and source bounds against.
        #[arg(long)]
        clips: Option<PathBuf>,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    /// Print the slow-fast sampling plan for a clip list.
    Plan { clips: PathBuf },
    /// Build an instruction/draft corpus from source videos.
    BuildDataset {
        /// JSON array of source videos.
        videos: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dropout: Option<f64>,
    },
    /// Run the generation model over a corpus.
    Generate {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep predictions already in `--out` and only generate the rest.
        #[arg(long)]
        resume: bool,
    },
    /// Score predictions against a corpus.
    Evaluate {
        corpus: PathBuf,
        predictions: PathBuf,
        #[arg(long)]
        with_judge: bool,
        #[arg(long)]
        with_vsr: bool,
    },
    /// Align a draft to realized TTS durations and resolve assets.
    Align {
        draft: PathBuf,
        /// JSON array of realized sentence durations in ms.
        #[arg(long)]
        tts: PathBuf,
        #[arg(long)]
        clips: PathBuf,
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.message.is_empty() {
                eprintln!("adcut: {e}");
            }
            e.code()
        }
    }
}
