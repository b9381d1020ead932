//! Damerau-Levenshtein distance.
//!
//! This is the unrestricted variant (Lowrance-Wagner): insertions, deletions,
//! substitutions and transpositions of adjacent characters, where a transposed
//! pair may be edited again afterwards. It differs from optimal string
//! alignment on inputs such as `"ca"` / `"abc"` (2 here, 3 under OSA).

use std::collections::HashMap;

/// Distance in Unicode scalar values between `a` and `b`.
pub fn damerau_levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    damerau_levenshtein_chars(&a, &b)
}

pub fn damerau_levenshtein_chars(a: &[char], b: &[char]) -> usize {
    let (n, m) = (a.len(), b.len());
    if n == 0 {
        return m;
    }
    if m == 0 {
        return n;
    }
    let max_dist = n + m;
    let width = m + 2;
    // (n + 2) x (m + 2) table; row/column 0 hold the sentinel.
    let mut h = vec![0usize; (n + 2) * width];
    let at = |i: usize, j: usize| i * width + j;
    h[at(0, 0)] = max_dist;
    for i in 0..=n {
        h[at(i + 1, 0)] = max_dist;
        h[at(i + 1, 1)] = i;
    }
    for j in 0..=m {
        h[at(0, j + 1)] = max_dist;
        h[at(1, j + 1)] = j;
    }

    // Last row in `a` where each character was seen.
    let mut last_row: HashMap<char, usize> = HashMap::new();
    for i in 1..=n {
        let mut last_match_col = 0;
        for j in 1..=m {
            let i1 = last_row.get(&b[j - 1]).copied().unwrap_or(0);
            let j1 = last_match_col;
            let cost = if a[i - 1] == b[j - 1] {
                last_match_col = j;
                0
            } else {
                1
            };
            let substitution = h[at(i, j)] + cost;
            let insertion = h[at(i + 1, j)] + 1;
            let deletion = h[at(i, j + 1)] + 1;
            let transposition = h[at(i1, j1)] + (i - i1 - 1) + 1 + (j - j1 - 1);
            h[at(i + 1, j + 1)] = substitution.min(insertion).min(deletion).min(transposition);
        }
        last_row.insert(a[i - 1], i);
    }
    h[at(n + 1, m + 1)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_distances() {
        assert_eq!(damerau_levenshtein("", ""), 0);
        assert_eq!(damerau_levenshtein("abc", ""), 3);
        assert_eq!(damerau_levenshtein("kitten", "sitting"), 3);
        assert_eq!(damerau_levenshtein("ab", "ba"), 1);
        assert_eq!(damerau_levenshtein("ca", "abc"), 2);
    }

    #[test]
    fn counts_characters_not_bytes() {
        assert_eq!(damerau_levenshtein("café", "cafe"), 1);
    }
}
