//! Inter-rater agreement from a long-format ratings file:
//! `variable,subject,rater,category`, one row per rating.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::stats::{fleiss_kappa, RatingMatrix, StatsError};

/// Agreement reported for the original deployment's coding, shown next to
/// the computed values for context only.
pub const REFERENCE_KAPPA: [(&str, f64); 3] =
    [("artwork_dynamism", 0.96), ("pose_dynamism", 0.86), ("narrative_change", 0.88)];

#[derive(Debug, Clone, Deserialize)]
pub struct Rating {
    pub variable: String,
    pub subject: String,
    pub rater: String,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub variable: String,
    pub subjects: usize,
    pub raters: u64,
    pub categories: Vec<String>,
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_kappa: Option<f64>,
}

pub fn read_ratings<R: std::io::Read>(reader: R) -> Result<Vec<Rating>, csv::Error> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader).deserialize().collect()
}

/// Fleiss' kappa per variable. Categories are the labels seen for that
/// variable; every subject must be rated by the same number of raters.
pub fn agreement_by_variable(ratings: &[Rating]) -> Vec<Agreement> {
    let mut by_var: BTreeMap<&str, Vec<&Rating>> = BTreeMap::new();
    for r in ratings {
        by_var.entry(r.variable.as_str()).or_default().push(r);
    }
    by_var
        .into_iter()
        .map(|(variable, rows)| {
            let categories: Vec<String> =
                rows.iter().map(|r| r.category.clone()).collect::<BTreeSet<_>>().into_iter().collect();
            let mut subjects: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for r in &rows {
                let c = categories.binary_search(&r.category).expect("category collected above");
                subjects.entry(r.subject.as_str()).or_default().push(c);
            }
            let labels: Vec<Vec<usize>> = subjects.into_values().collect();
            let reference_kappa = REFERENCE_KAPPA.iter().find(|(v, _)| *v == variable).map(|&(_, k)| k);
            let computed: Result<(f64, u64), StatsError> = RatingMatrix::from_labels(&labels, categories.len())
                .and_then(|m| fleiss_kappa(&m).map(|k| (k, m.raters())));
            let (kappa, raters, error) = match computed {
                Ok((k, raters)) => (Some(k), raters, None),
                Err(e) => (None, 0, Some(e.to_string())),
            };
            Agreement { variable: variable.to_string(), subjects: labels.len(), raters, categories, kappa, error, reference_kappa }
        })
        .collect()
}
