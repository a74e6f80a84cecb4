//! Coded session records, one CSV row per participant.
//!
//! Header:
//!
//! ```text
//! code,booth,group,strategy,artwork_source,artwork_dynamism,pose_dynamism,
//! narrative_origin,big5_o,big5_c,big5_e,big5_a,big5_n,pleasantness,enjoyment
//! ```
//!
//! The five `big5_*` columns are either all present or all empty; the two
//! Likert columns may be empty independently.

use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Booth {
    Public,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Participation {
    Group,
    Alone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Reimagine,
    Imitate,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    FinnishGoldenAge,
    Wikiart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamism {
    Low,
    Medium,
    High,
}

impl Dynamism {
    /// Ordinal coding used in correlations.
    pub fn ordinal(self) -> f64 {
        match self {
            Dynamism::Low => 1.0,
            Dynamism::Medium => 2.0,
            Dynamism::High => 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NarrativeOrigin {
    User,
    Na,
    Both,
    Model,
}

impl NarrativeOrigin {
    pub const ALL: [NarrativeOrigin; 4] =
        [NarrativeOrigin::User, NarrativeOrigin::Na, NarrativeOrigin::Both, NarrativeOrigin::Model];

    pub fn as_str(self) -> &'static str {
        match self {
            NarrativeOrigin::User => "user",
            NarrativeOrigin::Na => "na",
            NarrativeOrigin::Both => "both",
            NarrativeOrigin::Model => "model",
        }
    }
}

/// Openness, conscientiousness, extraversion, agreeableness, neuroticism.
pub const TRAITS: [&str; 5] = ["openness", "conscientiousness", "extraversion", "agreeableness", "neuroticism"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub code: String,
    pub booth: Booth,
    pub group: Participation,
    pub strategy: Strategy,
    pub artwork_source: Source,
    pub artwork_dynamism: Dynamism,
    pub pose_dynamism: Dynamism,
    pub narrative_origin: NarrativeOrigin,
    /// In [`TRAITS`] order, each in [1, 5].
    pub big5: Option<[f64; 5]>,
    pub pleasantness: Option<u8>,
    pub enjoyment: Option<u8>,
}

/// Flat CSV shape of a record.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Row {
    code: String,
    booth: Booth,
    group: Participation,
    strategy: Strategy,
    artwork_source: Source,
    artwork_dynamism: Dynamism,
    pose_dynamism: Dynamism,
    narrative_origin: NarrativeOrigin,
    big5_o: Option<f64>,
    big5_c: Option<f64>,
    big5_e: Option<f64>,
    big5_a: Option<f64>,
    big5_n: Option<f64>,
    pleasantness: Option<u8>,
    enjoyment: Option<u8>,
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("records file: {0}")]
    Csv(#[from] csv::Error),
    #[error("record {line} ({code}): {reason}")]
    Invalid { line: u64, code: String, reason: String },
}

impl SessionRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.code.trim().is_empty() {
            return Err("empty code".into());
        }
        if let Some(b) = self.big5 {
            for (name, v) in TRAITS.iter().zip(b) {
                if !(1.0..=5.0).contains(&v) {
                    return Err(format!("{name} = {v} outside [1, 5]"));
                }
            }
        }
        for (name, v) in [("pleasantness", self.pleasantness), ("enjoyment", self.enjoyment)] {
            if let Some(v) = v {
                if !(1..=5).contains(&v) {
                    return Err(format!("{name} = {v} outside 1..=5"));
                }
            }
        }
        Ok(())
    }

    fn from_row(row: Row) -> Result<Self, String> {
        let parts = [row.big5_o, row.big5_c, row.big5_e, row.big5_a, row.big5_n];
        let big5 = match parts.iter().filter(|v| v.is_some()).count() {
            0 => None,
            5 => Some(parts.map(|v| v.expect("counted"))),
            _ => return Err("big5 columns must be all present or all empty".into()),
        };
        let r = SessionRecord {
            code: row.code,
            booth: row.booth,
            group: row.group,
            strategy: row.strategy,
            artwork_source: row.artwork_source,
            artwork_dynamism: row.artwork_dynamism,
            pose_dynamism: row.pose_dynamism,
            narrative_origin: row.narrative_origin,
            big5,
            pleasantness: row.pleasantness,
            enjoyment: row.enjoyment,
        };
        r.validate()?;
        Ok(r)
    }

    fn to_row(&self) -> Row {
        let b = self.big5.map(|b| b.map(Some)).unwrap_or([None; 5]);
        Row {
            code: self.code.clone(),
            booth: self.booth,
            group: self.group,
            strategy: self.strategy,
            artwork_source: self.artwork_source,
            artwork_dynamism: self.artwork_dynamism,
            pose_dynamism: self.pose_dynamism,
            narrative_origin: self.narrative_origin,
            big5_o: b[0],
            big5_c: b[1],
            big5_e: b[2],
            big5_a: b[3],
            big5_n: b[4],
            pleasantness: self.pleasantness,
            enjoyment: self.enjoyment,
        }
    }
}

pub fn read_records<R: std::io::Read>(reader: R) -> Result<Vec<SessionRecord>, RecordError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row?;
        let code = row.code.clone();
        let line = i as u64 + 2;
        out.push(SessionRecord::from_row(row).map_err(|reason| RecordError::Invalid { line, code, reason })?);
    }
    Ok(out)
}

pub fn load_records(path: &Path) -> Result<Vec<SessionRecord>, RecordError> {
    read_records(std::fs::File::open(path).map_err(csv::Error::from)?)
}

pub fn write_records<W: std::io::Write>(writer: W, records: &[SessionRecord]) -> Result<(), RecordError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r.to_row())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
