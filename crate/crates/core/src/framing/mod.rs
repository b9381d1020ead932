//! Framing devices: lexicon-driven tagging of predicates and source
//! modifiers, and the statistics built on the tags.

mod analysis;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Leaning;
use crate::extraction::TupleRecord;
use crate::label::Stance;

pub use analysis::{
    coverage_breakdown, device_counts, framing_table, robustness_correlation, write_framing_csv, CoverageBreakdown,
    CoverageCounts, DeviceKey, FramingConfig, FramingStat, LeaningTally,
};

#[derive(Debug, Error)]
pub enum FramingError {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("invalid framing lexicon: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("entry {entry:?} appears in both {first:?} and {second:?}")]
    DuplicateEntry { entry: String, first: String, second: String },
    #[error("category {0:?} has no entries")]
    EmptyCategory(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Affirming,
    Doubting,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Affirming => "affirming",
            Polarity::Doubting => "doubting",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Predicate,
    SourceModifier,
}

impl Slot {
    pub fn as_str(self) -> &'static str {
        match self {
            Slot::Predicate => "predicate",
            Slot::SourceModifier => "source_modifier",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconCategory {
    pub name: String,
    pub polarity: Polarity,
    pub slot: Slot,
    pub entries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct LexiconFile {
    category: Vec<LexiconCategory>,
}

/// One lexicon entry as matched against tuples.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Device {
    /// Lower-cased entry text.
    pub name: String,
    pub category: String,
    pub polarity: Polarity,
    pub slot: Slot,
}

/// Validated framing lexicon. Entries are lower-cased and deduplicated
/// within their category; no entry may belong to two categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramingLexicon {
    pub devices: Vec<Device>,
    /// Token sequences per device index; hyphenated entries also match with
    /// the hyphens split off as separate tokens or dropped.
    patterns: Vec<Vec<Vec<String>>>,
}

pub const SHIPPED_LEXICON: &str = include_str!("../../data/framing_devices.toml");

fn patterns_for(entry: &str) -> Vec<Vec<String>> {
    let words: Vec<String> = entry.split_whitespace().map(str::to_string).collect();
    let mut out = vec![words.clone()];
    if entry.contains('-') {
        let split: Vec<String> = words
            .iter()
            .flat_map(|w| {
                let parts: Vec<&str> = w.split('-').collect();
                let mut v = Vec::new();
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        v.push("-".to_string());
                    }
                    if !p.is_empty() {
                        v.push(p.to_string());
                    }
                }
                v
            })
            .collect();
        let dropped: Vec<String> = split.iter().filter(|t| *t != "-").cloned().collect();
        out.push(split);
        out.push(dropped);
    }
    out.dedup();
    out
}

impl FramingLexicon {
    pub fn from_toml_str(text: &str) -> Result<Self, FramingError> {
        let file: LexiconFile = toml::from_str(text)?;
        let mut owner: BTreeMap<String, String> = BTreeMap::new();
        let mut devices = Vec::new();
        for cat in file.category {
            if cat.entries.is_empty() {
                return Err(FramingError::EmptyCategory(cat.name));
            }
            let mut seen = BTreeSet::new();
            for raw in &cat.entries {
                let name = crate::text::fold_whitespace(&raw.to_lowercase());
                if !seen.insert(name.clone()) {
                    continue;
                }
                if let Some(first) = owner.get(&name) {
                    return Err(FramingError::DuplicateEntry {
                        entry: name,
                        first: first.clone(),
                        second: cat.name.clone(),
                    });
                }
                owner.insert(name.clone(), cat.name.clone());
                devices.push(Device {
                    name,
                    category: cat.name.clone(),
                    polarity: cat.polarity,
                    slot: cat.slot,
                });
            }
        }
        let patterns = devices.iter().map(|d| patterns_for(&d.name)).collect();
        Ok(FramingLexicon { devices, patterns })
    }

    pub fn shipped() -> Self {
        Self::from_toml_str(SHIPPED_LEXICON).expect("shipped framing lexicon is valid")
    }

    pub fn load(path: &Path) -> Result<Self, FramingError> {
        let text = std::fs::read_to_string(path).map_err(|e| FramingError::Io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    pub fn device(&self, name: &str) -> Option<&Device> {
        self.devices.iter().find(|d| d.name == name)
    }
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Devices present in a tuple. Predicates match on the lemma joined with
/// its particle ("point out"); source modifiers match as contiguous lemma
/// runs.
pub fn tag_devices<'a>(record: &TupleRecord, lexicon: &'a FramingLexicon) -> BTreeSet<&'a Device> {
    let predicate = record.tuple.predicate_phrase();
    let predicate: Vec<String> = predicate.split_whitespace().map(str::to_string).collect();
    let modifiers: Vec<String> = record.source_modifier_lemmas.iter().map(|l| l.to_lowercase()).collect();
    let mut out = BTreeSet::new();
    for (device, patterns) in lexicon.devices.iter().zip(&lexicon.patterns) {
        let hit = match device.slot {
            Slot::Predicate => patterns.iter().any(|p| *p == predicate),
            Slot::SourceModifier => patterns.iter().any(|p| contains_run(&modifiers, p)),
        };
        if hit {
            out.insert(device);
        }
    }
    out
}

/// Stance a leaning's own side holds: Left agrees, Right disagrees.
pub fn own_stance(leaning: Leaning) -> Option<Stance> {
    match leaning {
        Leaning::Left => Some(Stance::Agree),
        Leaning::Right => Some(Stance::Disagree),
        Leaning::Unknown => None,
    }
}

#[cfg(test)]
mod tests;
