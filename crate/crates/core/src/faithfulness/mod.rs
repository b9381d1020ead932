//! Source entities with publicly known climate stances, and whether the
//! opinions ascribed to them match those stances.

mod report;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::Stance;
use crate::text::{normalize_entity, token_set_ratio};

pub use report::{
    faithfulness_report, hypocrisy_predicates, write_attributions_csv, write_hypocrisy_csv, write_review_csv,
    AttributionRecord, FaithfulnessReport, HypocrisyConfig, HypocrisyPredicate, RateSummary, ReviewCandidate,
};

#[derive(Debug, Error)]
pub enum FaithfulnessError {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("invalid roster: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("name {name:?} is listed under both {first:?} and {second:?}")]
    DuplicateName { name: String, first: String, second: String },
    #[error("roster entry {0:?} has an empty name")]
    EmptyName(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityStance {
    Activist,
    Skeptic,
}

impl EntityStance {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityStance::Activist => "activist",
            EntityStance::Skeptic => "skeptic",
        }
    }

    /// The opinion stance that agrees with the entity's public position.
    pub fn held_stance(self) -> Stance {
        match self {
            EntityStance::Activist => Stance::Agree,
            EntityStance::Skeptic => Stance::Disagree,
        }
    }
}

/// Whether an opinion matches its source's known stance.
pub fn is_faithful(entity: EntityStance, opinion: Stance) -> bool {
    opinion == entity.held_stance()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub canonical: String,
    pub stance: EntityStance,
    #[serde(default)]
    pub aliases: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RosterFile {
    #[serde(default)]
    entity: Vec<RosterEntry>,
}

/// Roster with every name and alias normalized for matching. No normalized
/// name may belong to two entries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EntityRoster {
    pub entries: Vec<RosterEntry>,
    /// (normalized name, entry index), canonical names before aliases.
    names: Vec<(String, usize)>,
}

pub const SHIPPED_ROSTER: &str = include_str!("../../data/entity_roster.toml");

impl EntityRoster {
    pub fn new(entries: Vec<RosterEntry>) -> Result<Self, FaithfulnessError> {
        let mut owner: BTreeMap<String, usize> = BTreeMap::new();
        let mut names = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            for raw in std::iter::once(&e.canonical).chain(&e.aliases) {
                let name = normalize_entity(raw);
                if name.is_empty() {
                    return Err(FaithfulnessError::EmptyName(e.canonical.clone()));
                }
                match owner.get(&name) {
                    Some(&j) if j == i => continue,
                    Some(&j) => {
                        return Err(FaithfulnessError::DuplicateName {
                            name,
                            first: entries[j].canonical.clone(),
                            second: e.canonical.clone(),
                        })
                    }
                    None => {
                        owner.insert(name.clone(), i);
                        names.push((name, i));
                    }
                }
            }
        }
        Ok(EntityRoster { entries, names })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, FaithfulnessError> {
        let file: RosterFile = toml::from_str(text)?;
        Self::new(file.entity)
    }

    pub fn shipped() -> Self {
        Self::from_toml_str(SHIPPED_ROSTER).expect("shipped roster is valid")
    }

    pub fn load(path: &Path) -> Result<Self, FaithfulnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| FaithfulnessError::Io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    /// Minimum token-set score (0 to 100) for an automatic match.
    pub threshold: f64,
    /// Sub-threshold candidates scoring at least this go to the review file.
    pub review_floor: f64,
    /// Review candidates kept per roster entity.
    pub review_limit: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            threshold: 90.0,
            review_floor: 60.0,
            review_limit: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMatch {
    pub entry: usize,
    pub canonical: String,
    pub stance: EntityStance,
    pub score: f64,
}

/// Highest-scoring roster entity for a source string, whatever the score.
/// Ties keep the earlier roster name.
pub fn best_match(source: &str, roster: &EntityRoster) -> Option<EntityMatch> {
    let norm = normalize_entity(source);
    if norm.is_empty() {
        return None;
    }
    let mut best: Option<(f64, usize)> = None;
    for (name, i) in &roster.names {
        let s = token_set_ratio(&norm, name);
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, *i));
        }
    }
    best.map(|(score, i)| {
        let e = &roster.entries[i];
        EntityMatch {
            entry: i,
            canonical: e.canonical.clone(),
            stance: e.stance,
            score,
        }
    })
}

/// Best roster match at or above the configured threshold.
pub fn canonicalize(source: &str, roster: &EntityRoster, config: &MatchConfig) -> Option<EntityMatch> {
    best_match(source, roster).filter(|m| m.score >= config.threshold)
}
