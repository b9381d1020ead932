use std::collections::BTreeMap;

use rayon::prelude::*;

use super::ArticleRecord;
use crate::text::{damerau_levenshtein, fold_whitespace};

#[derive(Debug, Clone, PartialEq)]
pub struct TitleDedupConfig {
    /// Titles are duplicates when `distance <= threshold * min(len_a, len_b)`.
    pub threshold: f64,
    /// Only compare titles from the same outlet.
    pub block_by_outlet: bool,
}

impl Default for TitleDedupConfig {
    fn default() -> Self {
        TitleDedupConfig {
            threshold: 0.2,
            block_by_outlet: true,
        }
    }
}

/// Pairwise duplicate test on already case-folded, whitespace-collapsed
/// titles. Lengths are in characters.
pub fn titles_duplicate(a: &str, b: &str, threshold: f64) -> bool {
    let (la, lb) = (a.chars().count(), b.chars().count());
    let limit = threshold * la.min(lb) as f64 + 1e-9;
    if (la.abs_diff(lb) as f64) > limit {
        return false;
    }
    damerau_levenshtein(a, b) as f64 <= limit
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Groups near-identical titles (transitively) and keeps one article per
/// group: the earliest `publish_date`, then the smallest `article_id`.
/// Articles with empty titles are always kept. Output preserves input order.
pub fn dedup_by_title(articles: Vec<ArticleRecord>, config: &TitleDedupConfig) -> Vec<ArticleRecord> {
    let titles: Vec<String> = articles.iter().map(|a| fold_whitespace(&a.title)).collect();

    let mut blocks: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, a) in articles.iter().enumerate() {
        if titles[i].is_empty() {
            log::warn!("article {}: empty title, kept without comparison", a.article_id);
            continue;
        }
        let key = if config.block_by_outlet { a.outlet.as_str() } else { "" };
        blocks.entry(key).or_default().push(i);
    }

    let edges: Vec<(usize, usize)> = blocks
        .values()
        .collect::<Vec<_>>()
        .par_iter()
        .flat_map_iter(|members| {
            let mut pairs = Vec::new();
            for (x, &i) in members.iter().enumerate() {
                for &j in &members[x + 1..] {
                    if titles_duplicate(&titles[i], &titles[j], config.threshold) {
                        pairs.push((i, j));
                    }
                }
            }
            pairs
        })
        .collect();

    let mut sets = DisjointSet::new(articles.len());
    for (i, j) in edges {
        sets.union(i, j);
    }

    let mut best: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..articles.len() {
        if titles[i].is_empty() {
            continue;
        }
        let root = sets.find(i);
        let better = |cur: usize| {
            let (a, b) = (&articles[i], &articles[cur]);
            (a.publish_date, &a.article_id) < (b.publish_date, &b.article_id)
        };
        match best.get(&root) {
            Some(&cur) if !better(cur) => {}
            _ => {
                best.insert(root, i);
            }
        }
    }
    let mut keep = vec![false; articles.len()];
    for &i in best.values() {
        keep[i] = true;
    }
    for (i, t) in titles.iter().enumerate() {
        if t.is_empty() {
            keep[i] = true;
        }
    }
    articles
        .into_iter()
        .zip(keep)
        .filter_map(|(a, k)| k.then_some(a))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Leaning;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn art(id: &str, title: &str, outlet: &str, day: u32) -> ArticleRecord {
        ArticleRecord {
            article_id: id.into(),
            url: format!("https://x.com/{id}"),
            title: title.into(),
            body: String::new(),
            outlet: outlet.into(),
            publish_date: NaiveDate::from_ymd_opt(2018, 1, day).unwrap(),
            leaning: Leaning::Unknown,
            is_wire: false,
        }
    }

    fn ids(v: &[ArticleRecord]) -> Vec<String> {
        v.iter().map(|a| a.article_id.clone()).collect()
    }

    #[test]
    fn identical_forty_char_titles_are_duplicates() {
        let t = "Arctic sea ice shrinks to a new low again";
        assert_eq!(t.chars().count(), 41);
        let t = &t[..40];
        assert!(titles_duplicate(t, t, 0.2));
    }

    #[test]
    fn one_transposition_in_32_chars() {
        let a = "climate report warns of sea rise";
        let b = "climate report warns fo sea rise";
        assert_eq!(a.chars().count(), 32);
        assert_eq!(damerau_levenshtein(a, b), 1);
        assert!(titles_duplicate(a, b, 0.2));
    }

    #[test]
    fn unrelated_titles_are_distinct() {
        let a = fold_whitespace("Arctic ice hits record low");
        let b = fold_whitespace("Senate passes energy bill");
        // 0.2 * 25 = 5; the titles share almost nothing.
        assert!(damerau_levenshtein(&a, &b) > 5);
        assert!(!titles_duplicate(&a, &b, 0.2));
    }

    #[test]
    fn keeps_earliest_then_smallest_id() {
        let out = dedup_by_title(
            vec![
                art("c", "Arctic ice hits record low", "Vox", 5),
                art("b", "arctic  ice hits record LOW", "Vox", 3),
                art("a", "Arctic ice hits record low!", "Vox", 3),
                art("d", "Senate passes energy bill", "Vox", 1),
            ],
            &TitleDedupConfig::default(),
        );
        assert_eq!(ids(&out), ["a", "d"]);
    }

    #[test]
    fn transitive_grouping() {
        // a~b and b~c but a and c are further apart than the threshold.
        let a = "abcdefghij";
        let b = "abcdefghxy";
        let c = "abcdefxyxy";
        let cfg = TitleDedupConfig::default();
        assert!(titles_duplicate(a, b, 0.2) && titles_duplicate(b, c, 0.2));
        assert!(!titles_duplicate(a, c, 0.2));
        let out = dedup_by_title(vec![art("1", a, "o", 1), art("2", b, "o", 2), art("3", c, "o", 3)], &cfg);
        assert_eq!(ids(&out), ["1"]);
    }

    #[test]
    fn blocking_per_outlet_and_empty_titles() {
        let out = dedup_by_title(
            vec![art("1", "Same title", "Vox", 1), art("2", "Same title", "Fox", 1), art("3", "  ", "Fox", 1)],
            &TitleDedupConfig::default(),
        );
        assert_eq!(out.len(), 3);
        let cfg = TitleDedupConfig { threshold: 0.2, block_by_outlet: false };
        let out = dedup_by_title(vec![art("1", "Same title", "Vox", 1), art("2", "Same title", "Fox", 1)], &cfg);
        assert_eq!(ids(&out), ["1"]);
    }

    fn corpus() -> impl Strategy<Value = Vec<ArticleRecord>> {
        let title = prop_oneof![
            Just("ice melts fast"),
            Just("ice melts fats"),
            Just("ice melt fast"),
            Just("senate bill passes"),
            Just("senate bills pass"),
            Just("")
        ];
        prop::collection::vec((title, prop_oneof![Just("A"), Just("B")], 1u32..5), 0..10).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (t, o, d))| art(&format!("id{i:02}"), t, o, d))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn title_dedup_is_idempotent(arts in corpus()) {
            let cfg = TitleDedupConfig::default();
            let once = dedup_by_title(arts, &cfg);
            let twice = dedup_by_title(once.clone(), &cfg);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn title_dedup_kept_set_is_order_independent(arts in corpus(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let cfg = TitleDedupConfig::default();
            let mut shuffled = arts.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let mut a = ids(&dedup_by_title(arts, &cfg));
            let mut b = ids(&dedup_by_title(shuffled, &cfg));
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
    }
}
