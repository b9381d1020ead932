//! Token-set similarity in the style of fuzzywuzzy / rapidfuzz, on a 0-100
//! scale.

use std::collections::BTreeSet;

/// Corporate suffixes dropped during entity normalization.
const LEGAL_SUFFIXES: &[&str] = &[
    "inc",
    "incorporated",
    "corp",
    "corporation",
    "co",
    "company",
    "llc",
    "ltd",
    "limited",
    "plc",
];

/// Lowercase, replace punctuation with spaces, drop a leading article and
/// corporate suffixes, collapse whitespace.
pub fn normalize_entity(s: &str) -> String {
    let cleaned: String = s
        .chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_lowercase().next().unwrap_or(c)
            } else {
                ' '
            }
        })
        .collect();
    let mut tokens: Vec<&str> = cleaned.split_whitespace().collect();
    if tokens.len() > 1 && tokens[0] == "the" {
        tokens.remove(0);
    }
    let kept: Vec<&str> = tokens
        .iter()
        .copied()
        .filter(|t| !LEGAL_SUFFIXES.contains(t))
        .collect();
    // A name made only of suffixes ("Co.") keeps its tokens.
    if kept.is_empty() {
        tokens.join(" ")
    } else {
        kept.join(" ")
    }
}

fn lcs_len(a: &[char], b: &[char]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &ca in a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Normalized indel similarity: `100 * (1 - indel / (|a| + |b|))`.
pub fn ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let total = a.len() + b.len();
    if total == 0 {
        return 100.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let indel = total - 2 * lcs_len(&a, &b);
    100.0 * (1.0 - indel as f64 / total as f64)
}

/// Token-set ratio of two already-normalized strings.
///
/// Compares the sorted shared tokens against each side's shared + remaining
/// tokens and keeps the best of the three pairwise ratios.
pub fn token_set_ratio(a: &str, b: &str) -> f64 {
    let ta: BTreeSet<&str> = a.split_whitespace().collect();
    let tb: BTreeSet<&str> = b.split_whitespace().collect();
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let join = |set: Vec<&str>| set.join(" ");
    let sect = join(ta.intersection(&tb).copied().collect());
    let only_a = join(ta.difference(&tb).copied().collect());
    let only_b = join(tb.difference(&ta).copied().collect());
    if !sect.is_empty() && (only_a.is_empty() || only_b.is_empty()) {
        return 100.0;
    }
    let combined = |rest: &str| {
        if sect.is_empty() {
            rest.to_string()
        } else if rest.is_empty() {
            sect.clone()
        } else {
            format!("{sect} {rest}")
        }
    };
    let with_a = combined(&only_a);
    let with_b = combined(&only_b);
    let mut best = ratio(&with_a, &with_b);
    if !sect.is_empty() {
        best = best.max(ratio(&sect, &with_a)).max(ratio(&sect, &with_b));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_strips_suffixes_and_articles() {
        assert_eq!(normalize_entity("Exxon Mobil Corp."), "exxon mobil");
        assert_eq!(normalize_entity("The Sierra Club"), "sierra club");
        assert_eq!(normalize_entity("  NASA "), "nasa");
        assert_eq!(normalize_entity("Co."), "co");
    }

    #[test]
    fn ratio_matches_hand_computation() {
        // LCS("exxon mobil", "exxonmobil") = 10, lengths 11 + 10.
        let r = ratio("exxon mobil", "exxonmobil");
        assert!((r - 100.0 * 20.0 / 21.0).abs() < 1e-12);
        assert_eq!(ratio("abc", "abc"), 100.0);
        assert_eq!(ratio("", "abc"), 0.0);
    }

    #[test]
    fn token_set_subset_scores_full() {
        assert_eq!(token_set_ratio("al gore", "gore"), 100.0);
        assert_eq!(token_set_ratio("gore al", "al gore"), 100.0);
    }

    #[test]
    fn token_set_disjoint() {
        assert_eq!(token_set_ratio("senator", "greta thunberg") < 50.0, true);
    }
}
