use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use super::ExtractionError;

/// Word lists used by the lexical filters. All entries are lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FilterLexicons {
    pub indicative_verbs: BTreeSet<String>,
    /// Each construction split into words.
    pub implicatives: Vec<Vec<String>>,
    pub question_words: BTreeSet<String>,
    /// Kept in file order; duplicates are harmless for prefix matching.
    pub topic_stems: Vec<String>,
    pub precision_keywords: Vec<String>,
    pub modals: BTreeSet<String>,
}

pub const INDICATIVE_FILE: &str = "indicative_verbs.txt";
pub const IMPLICATIVE_FILE: &str = "implicatives.txt";
pub const QUESTION_FILE: &str = "question_words.txt";
pub const TOPIC_FILE: &str = "topic_stems.txt";
pub const PRECISION_FILE: &str = "precision_keywords.txt";
pub const MODAL_FILE: &str = "modals.txt";

const DEFAULTS: [(&str, &str); 6] = [
    (INDICATIVE_FILE, include_str!("../../data/lexicons/indicative_verbs.txt")),
    (IMPLICATIVE_FILE, include_str!("../../data/lexicons/implicatives.txt")),
    (QUESTION_FILE, include_str!("../../data/lexicons/question_words.txt")),
    (TOPIC_FILE, include_str!("../../data/lexicons/topic_stems.txt")),
    (PRECISION_FILE, include_str!("../../data/lexicons/precision_keywords.txt")),
    (MODAL_FILE, include_str!("../../data/lexicons/modals.txt")),
];

/// One entry per line, `#` starts a comment, whitespace folded, lowercased.
pub fn parse_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

impl FilterLexicons {
    fn from_texts(get: impl Fn(&str) -> Result<String, ExtractionError>) -> Result<Self, ExtractionError> {
        Ok(FilterLexicons {
            indicative_verbs: parse_list(&get(INDICATIVE_FILE)?).into_iter().collect(),
            implicatives: parse_list(&get(IMPLICATIVE_FILE)?)
                .into_iter()
                .map(|l| l.split(' ').map(str::to_string).collect())
                .collect(),
            question_words: parse_list(&get(QUESTION_FILE)?).into_iter().collect(),
            topic_stems: parse_list(&get(TOPIC_FILE)?),
            precision_keywords: parse_list(&get(PRECISION_FILE)?),
            modals: parse_list(&get(MODAL_FILE)?).into_iter().collect(),
        })
    }

    /// Lists shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_texts(|name| {
            Ok(DEFAULTS
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t.to_string())
                .unwrap_or_default())
        })
        .expect("shipped lexicons parse")
    }

    /// Loads from a directory; files missing there fall back to the shipped
    /// list.
    pub fn load_dir(dir: &Path) -> Result<Self, ExtractionError> {
        Self::from_texts(|name| {
            let path = dir.join(name);
            if path.exists() {
                std::fs::read_to_string(&path).map_err(|e| ExtractionError::Io(path.display().to_string(), e))
            } else {
                log::warn!("{} not found, using shipped list", path.display());
                Ok(DEFAULTS.iter().find(|(n, _)| *n == name).map(|(_, t)| t.to_string()).unwrap_or_default())
            }
        })
    }

    pub fn matches_topic(&self, word: &str) -> bool {
        let w = word.to_lowercase();
        self.topic_stems.iter().any(|s| w.starts_with(s.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_lists() {
        let lex = FilterLexicons::shipped();
        assert!(lex.indicative_verbs.contains("say"));
        assert!(!lex.indicative_verbs.contains("require"));
        assert!(!lex.indicative_verbs.contains("watch"));
        assert_eq!(lex.question_words.len(), 7);
        assert!(lex.implicatives.contains(&vec!["fail".to_string(), "to".to_string()]));
        assert!(!lex.implicatives.contains(&vec!["continue".to_string(), "to".to_string()]));
        assert!(lex.topic_stems.iter().all(|s| s.chars().all(|c| c.is_lowercase() || c.is_ascii_digit())));
    }

    #[test]
    fn parse_list_handles_comments_and_case() {
        assert_eq!(parse_list("# c\n Say \n\nPoint   Out # x\n"), vec!["say", "point out"]);
    }
}
