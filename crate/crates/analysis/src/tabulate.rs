use std::collections::BTreeMap;

use serde::Serialize;

use crate::records::{Booth, NarrativeOrigin, Participation, SessionRecord, Source, Strategy, TRAITS};
use crate::stats::mean_sd;

/// One participant-context row: a (booth, strategy, participation) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContextRow {
    pub code: String,
    pub participants: usize,
    pub booth: Booth,
    pub strategy: Strategy,
    pub participation: Participation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Proportions {
    pub n: usize,
    pub counts: BTreeMap<&'static str, usize>,
    pub proportions: BTreeMap<&'static str, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Descriptive {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tabulation {
    pub n: usize,
    /// Non-empty cells, largest first, lettered A, B, ...
    pub context_table: Vec<ContextRow>,
    pub booth_totals: BTreeMap<Booth, usize>,
    pub source_split: BTreeMap<Source, usize>,
    /// Over every record.
    pub narrative_origin: Proportions,
    /// Over records with personality scores, i.e. interviewed participants.
    pub narrative_origin_interviewed: Proportions,
    /// Each statistic reports its own n; missing values are skipped.
    pub likert: BTreeMap<&'static str, Option<Descriptive>>,
    pub big5: BTreeMap<&'static str, Option<Descriptive>>,
}

fn letter_code(i: usize) -> String {
    let mut s = String::new();
    let mut i = i + 1;
    while i > 0 {
        i -= 1;
        s.insert(0, (b'A' + (i % 26) as u8) as char);
        i /= 26;
    }
    s
}

fn proportions<'a>(records: impl Iterator<Item = &'a SessionRecord>) -> Proportions {
    let mut counts: BTreeMap<&'static str, usize> = NarrativeOrigin::ALL.iter().map(|o| (o.as_str(), 0)).collect();
    let mut n = 0;
    for r in records {
        *counts.get_mut(r.narrative_origin.as_str()).expect("all origins present") += 1;
        n += 1;
    }
    let proportions = counts.iter().map(|(&k, &c)| (k, if n == 0 { 0.0 } else { c as f64 / n as f64 })).collect();
    Proportions { n, counts, proportions }
}

fn describe(values: Vec<f64>) -> Option<Descriptive> {
    let n = values.len();
    mean_sd(&values).map(|(mean, sd)| Descriptive { n, mean, sd })
}

pub fn tabulate(records: &[SessionRecord]) -> Tabulation {
    let mut cells: BTreeMap<(Booth, Strategy, Participation), usize> = BTreeMap::new();
    let mut booth_totals = BTreeMap::from([(Booth::Public, 0), (Booth::Private, 0)]);
    let mut source_split = BTreeMap::from([(Source::FinnishGoldenAge, 0), (Source::Wikiart, 0)]);
    for r in records {
        *cells.entry((r.booth, r.strategy, r.group)).or_default() += 1;
        *booth_totals.entry(r.booth).or_default() += 1;
        *source_split.entry(r.artwork_source).or_default() += 1;
    }
    let mut ordered: Vec<_> = cells.into_iter().collect();
    ordered.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let context_table = ordered
        .into_iter()
        .enumerate()
        .map(|(i, ((booth, strategy, participation), participants))| ContextRow {
            code: letter_code(i),
            participants,
            booth,
            strategy,
            participation,
        })
        .collect();

    let likert = BTreeMap::from([
        ("pleasantness", describe(records.iter().filter_map(|r| r.pleasantness.map(f64::from)).collect())),
        ("enjoyment", describe(records.iter().filter_map(|r| r.enjoyment.map(f64::from)).collect())),
    ]);
    let big5 = TRAITS
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, describe(records.iter().filter_map(|r| r.big5.map(|b| b[i])).collect())))
        .collect();

    Tabulation {
        n: records.len(),
        context_table,
        booth_totals,
        source_split,
        narrative_origin: proportions(records.iter()),
        narrative_origin_interviewed: proportions(records.iter().filter(|r| r.big5.is_some())),
        likert,
        big5,
    }
}
