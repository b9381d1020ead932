//! String utilities shared by corpus de-duplication and entity matching.

pub mod edit_distance;
pub mod fuzzy;

pub use edit_distance::damerau_levenshtein;
pub use fuzzy::{normalize_entity, ratio, token_set_ratio};

/// Lowercase and collapse every whitespace run to a single space.
pub fn fold_whitespace(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}
