use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExtractionError;

const DEFAULT_DEPRELS: &str = include_str!("../../data/deprels.toml");

/// Dependency label inventory. Every field is a set of accepted labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeprelMap {
    pub ccomp: BTreeSet<String>,
    pub subject: BTreeSet<String>,
    pub particle: BTreeSet<String>,
    pub relative_clause: BTreeSet<String>,
    pub participial: BTreeSet<String>,
    pub negation: BTreeSet<String>,
    pub negation_advmod: BTreeSet<String>,
    pub negation_lemmas: BTreeSet<String>,
    pub auxiliary: BTreeSet<String>,
    pub name_parts: BTreeSet<String>,
    pub marker: BTreeSet<String>,
    pub determiner: BTreeSet<String>,
    pub negating_determiners: BTreeSet<String>,
    pub relative_pronouns: BTreeSet<String>,
    pub punctuation: BTreeSet<String>,
}

impl Default for DeprelMap {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_DEPRELS).expect("shipped deprel map parses")
    }
}

impl DeprelMap {
    pub fn from_toml_str(s: &str) -> Result<Self, ExtractionError> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self, ExtractionError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExtractionError::Io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    /// Label with any `:subtype` stripped is also tried.
    pub(crate) fn is(set: &BTreeSet<String>, label: &str) -> bool {
        let label = label.to_ascii_lowercase();
        set.contains(&label) || label.split_once(':').is_some_and(|(base, _)| set.contains(base))
    }
}

/// Switches controlling tuple extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    /// Count a negation child of the opinion root as negating the tuple.
    pub negation_on_opinion_root: bool,
    /// Drop negated and modal tuples in the default pipeline.
    pub drop_negated: bool,
    pub drop_modal: bool,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            negation_on_opinion_root: true,
            drop_negated: true,
            drop_modal: true,
        }
    }
}
