//! JSON-lines corpus and prediction files.

use serde::{Deserialize, Serialize};

use super::types::DatasetSample;
use super::DatasetError;

/// One model output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionLine {
    pub sample_id: u64,
    /// Draft exactly as returned by the model.
    pub draft_json: String,
}

fn write_lines<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("corpus items serialize");
        out.push(b'\n');
    }
    out
}

fn read_lines<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<Vec<T>, DatasetError> {
    let text = std::str::from_utf8(bytes).map_err(|e| DatasetError::Corpus {
        line: 0,
        message: e.to_string(),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Corpus {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// One canonical JSON object per line, newline terminated.
pub fn write_corpus(samples: &[DatasetSample]) -> Vec<u8> {
    write_lines(samples)
}

pub fn read_corpus(bytes: &[u8]) -> Result<Vec<DatasetSample>, DatasetError> {
    read_lines(bytes)
}

pub fn write_predictions(lines: &[PredictionLine]) -> Vec<u8> {
    write_lines(lines)
}

pub fn read_predictions(bytes: &[u8]) -> Result<Vec<PredictionLine>, DatasetError> {
    read_lines(bytes)
}
