use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::StanceError;
use crate::label::Stance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelOrigin {
    InCoreLinear,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanceLabel {
    /// Item id or tuple id.
    pub reference: String,
    pub label: Stance,
    pub confidence: f64,
    pub origin: LabelOrigin,
}

pub fn write_labels<W: Write>(w: W, labels: &[StanceLabel]) -> Result<(), StanceError> {
    let mut out = csv::Writer::from_writer(w);
    for l in labels {
        out.serialize(l)?;
    }
    out.flush().map_err(|e| StanceError::Io("labels".into(), e))?;
    Ok(())
}

/// Reads a file written by [`write_labels`]; lines starting with `#` are
/// skipped.
pub fn read_labels<R: Read>(r: R) -> Result<Vec<StanceLabel>, StanceError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    pub line: u64,
    pub reference: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestOutcome {
    /// In order of first appearance, each holding its last value.
    pub labels: Vec<StanceLabel>,
    pub rejected: Vec<RejectedRow>,
    /// References that appeared more than once.
    pub duplicates: Vec<String>,
}

fn bad(line: u64, message: impl Into<String>) -> StanceError {
    StanceError::BadRow {
        line,
        message: message.into(),
    }
}

/// Validates `reference,label,confidence` rows against the known tuple
/// ids. An optional header row is recognized by its label column reading
/// `label`; `#` lines are comments.
pub fn ingest_external_labels<R: Read>(r: R, known: &BTreeSet<String>) -> Result<IngestOutcome, StanceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut order: Vec<String> = Vec::new();
    let mut latest: BTreeMap<String, StanceLabel> = BTreeMap::new();
    let mut outcome = IngestOutcome::default();
    let mut first = true;
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if std::mem::take(&mut first) && row.get(1).is_some_and(|l| l.eq_ignore_ascii_case("label")) {
            continue;
        }
        if row.len() != 3 {
            return Err(bad(line, format!("expected 3 fields, found {}", row.len())));
        }
        let reference = row[0].to_string();
        let label: Stance = row[1].parse().map_err(|_| StanceError::UnknownLabel {
            line,
            value: row[1].to_string(),
        })?;
        let confidence: f64 = row[2].parse().map_err(|_| bad(line, format!("invalid confidence {:?}", &row[2])))?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(bad(line, format!("confidence {confidence} outside [0, 1]")));
        }
        if !known.contains(&reference) {
            log::warn!("line {line}: unknown tuple reference {reference:?}, row rejected");
            outcome.rejected.push(RejectedRow {
                line,
                reference,
                reason: "unknown tuple reference".into(),
            });
            continue;
        }
        let value = StanceLabel {
            reference: reference.clone(),
            label,
            confidence,
            origin: LabelOrigin::External,
        };
        if latest.insert(reference.clone(), value).is_some() {
            log::warn!("line {line}: duplicate label for {reference:?}, keeping the later row");
            if !outcome.duplicates.contains(&reference) {
                outcome.duplicates.push(reference);
            }
        } else {
            order.push(reference);
        }
    }
    outcome.labels = order.into_iter().map(|r| latest.remove(&r).expect("recorded")).collect();
    Ok(outcome)
}
