use std::collections::BTreeMap;

use rand::Rng;

use crate::backends::{api, BackendClient};

use super::types::{Analysis, Deconstruction, Dimension, FreePrompt};
use super::DatasetError;

pub const MAX_REVISION_ROUNDS: u32 = 2;
pub const DEFAULT_DROPOUT: f64 = 0.3;

/// Judge analysis of every dimension. Without shot captions there is nothing
/// to base a storyline on, so it is absent regardless of the judge.
pub fn analyze_dimensions(dec: &Deconstruction, judge: &BackendClient) -> Result<Analysis, DatasetError> {
    let mut analysis = api::analyze(judge, dec)?;
    if dec.shot_captions.is_empty() {
        analysis.insert(Dimension::VisualStoryline, None);
    }
    Ok(analysis)
}

/// One independent keep/drop draw per dimension; `true` means kept.
pub fn draw_retained(rng: &mut impl Rng, count: usize, dropout_p: f64) -> Vec<bool> {
    (0..count).map(|_| !rng.random_bool(dropout_p)).collect()
}

/// Drops each present dimension with probability `dropout_p`, redrawing
/// whenever every dimension would be dropped.
pub fn generate_free_prompt(
    analysis: &Analysis,
    rng: &mut impl Rng,
    dropout_p: f64,
) -> Result<FreePrompt, DatasetError> {
    if !(0.0..1.0).contains(&dropout_p) {
        return Err(DatasetError::InvalidDropout(dropout_p));
    }
    let present: Vec<(Dimension, &String)> = analysis
        .iter()
        .filter_map(|(d, t)| t.as_ref().filter(|t| !t.trim().is_empty()).map(|t| (*d, t)))
        .collect();
    if present.is_empty() {
        return Err(DatasetError::InvalidPrompt("analysis has no present dimension".into()));
    }
    let mask = loop {
        let mask = draw_retained(rng, present.len(), dropout_p);
        if mask.iter().any(|&k| k) {
            break mask;
        }
    };
    let dims: BTreeMap<Dimension, String> = present
        .into_iter()
        .zip(mask)
        .filter(|(_, keep)| *keep)
        .map(|((d, t), _)| (d, t.trim().to_string()))
        .collect();
    FreePrompt::from_dimensions(dims)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verified {
    pub prompt: FreePrompt,
    pub revisions: u32,
}

/// Asks the judge to approve the prompt, accepting its revisions for at most
/// [`MAX_REVISION_ROUNDS`] rounds.
pub fn verify_free_prompt(
    prompt: &FreePrompt,
    analysis: &Analysis,
    judge: &BackendClient,
) -> Result<Verified, DatasetError> {
    let mut current = prompt.clone();
    let mut revisions = 0;
    while revisions < MAX_REVISION_ROUNDS {
        let verdict = api::verify(judge, &current, analysis)?;
        if verdict.approved {
            break;
        }
        let revised = verdict.revised.expect("checked by api::verify");
        revised
            .check()
            .map_err(|e| DatasetError::RevisionInvalid(e.to_string()))?;
        current = revised;
        revisions += 1;
    }
    Ok(Verified {
        prompt: current,
        revisions,
    })
}
