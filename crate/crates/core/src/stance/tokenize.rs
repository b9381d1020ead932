use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Preprocessing {
    pub remove_stopwords: bool,
    /// Replace every digit with `#`.
    pub convert_digits: bool,
}

/// English function words dropped when stopword removal is on.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at", "be",
    "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "did", "do", "does",
    "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her",
    "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself",
    "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
    "other", "our", "ours", "ourselves", "out", "over", "own", "s", "same", "she", "should", "so", "some", "such", "t",
    "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
    "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "you", "your", "yours", "yourself", "yourselves",
];

/// Lowercased runs of alphanumeric characters.
pub fn tokenize(text: &str, pre: &Preprocessing) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| {
            let lower = t.to_lowercase();
            if pre.convert_digits {
                lower.chars().map(|c| if c.is_numeric() { '#' } else { c }).collect()
            } else {
                lower
            }
        })
        .filter(|t| !(pre.remove_stopwords && STOPWORDS.binary_search(&t.as_str()).is_ok()))
        .collect()
}

/// Unigrams followed by space-joined bigrams.
pub fn features(text: &str, pre: &Preprocessing) -> Vec<String> {
    let tokens = tokenize(text, pre);
    let mut out = tokens.clone();
    out.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    out
}
