//! Personality traits against installation choices.
//!
//! Numeric codings: booth public=0 private=1; participation alone=0
//! group=1; artwork source finnish-golden-age=0 wikiart=1; dynamism
//! low=1 medium=2 high=3.

use serde::Serialize;

use crate::records::{Booth, Participation, SessionRecord, Source, TRAITS};
use crate::stats::{permutation_p, spearman, CorrelationResult};

pub const CHOICES: [&str; 5] = ["booth", "group", "artwork_source", "artwork_dynamism", "pose_dynamism"];

/// Fewest records with personality scores worth correlating.
pub const MIN_RECORDS: usize = 10;

pub const ALPHA: f64 = 0.05;

fn choice_value(r: &SessionRecord, choice: &str) -> f64 {
    match choice {
        "booth" => f64::from(u8::from(r.booth == Booth::Private)),
        "group" => f64::from(u8::from(r.group == Participation::Group)),
        "artwork_source" => f64::from(u8::from(r.artwork_source == Source::Wikiart)),
        "artwork_dynamism" => r.artwork_dynamism.ordinal(),
        "pose_dynamism" => r.pose_dynamism.ordinal(),
        other => unreachable!("unknown choice {other}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairResult {
    pub trait_name: &'static str,
    pub choice: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<CorrelationResult>,
    pub significant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

/// Spearman rho for every trait × choice pair, in trait-major order.
/// `permutation` = (resamples, seed) adds a permutation p to each pair.
pub fn correlate_choices(records: &[SessionRecord], permutation: Option<(usize, u64)>) -> Vec<PairResult> {
    let scored: Vec<(&SessionRecord, [f64; 5])> = records.iter().filter_map(|r| r.big5.map(|b| (r, b))).collect();
    let mut out = Vec::with_capacity(TRAITS.len() * CHOICES.len());
    for (ti, &trait_name) in TRAITS.iter().enumerate() {
        for (ci, &choice) in CHOICES.iter().enumerate() {
            let skip = |reason: String| PairResult { trait_name, choice, result: None, significant: false, skipped: Some(reason) };
            if scored.len() < MIN_RECORDS {
                out.push(skip(format!("only {} records with personality scores, need {MIN_RECORDS}", scored.len())));
                continue;
            }
            let x: Vec<f64> = scored.iter().map(|(_, b)| b[ti]).collect();
            let y: Vec<f64> = scored.iter().map(|(r, _)| choice_value(r, choice)).collect();
            match spearman(&x, &y) {
                Ok(mut res) => {
                    if let Some((resamples, seed)) = permutation {
                        let pair_seed = seed.wrapping_add((ti * CHOICES.len() + ci) as u64);
                        res.permutation_p = permutation_p(&x, &y, resamples, pair_seed).ok();
                    }
                    out.push(PairResult { trait_name, choice, significant: res.p_value < ALPHA, result: Some(res), skipped: None });
                }
                Err(e) => out.push(skip(e.to_string())),
            }
        }
    }
    out
}
