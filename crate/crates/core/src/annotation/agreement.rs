use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::label::Stance;

use super::{counts_by_item, AggregationFit, AnnotationRecord};

/// Shannon entropy (natural log) of empirical proportions.
pub fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardItem {
    pub item_id: String,
    pub entropy: f64,
    /// Disagree, neutral, agree.
    pub counts: [usize; 3],
}

/// The `n` items with the highest response entropy; ties by item id.
pub fn hardest_items(records: &[AnnotationRecord], n: usize) -> Vec<HardItem> {
    let mut items: Vec<HardItem> = counts_by_item(records)
        .into_iter()
        .map(|(item_id, counts)| HardItem {
            entropy: entropy(&counts),
            item_id,
            counts,
        })
        .collect();
    items.sort_by(|a, b| b.entropy.total_cmp(&a.entropy).then_with(|| a.item_id.cmp(&b.item_id)));
    items.truncate(n);
    items
}

/// Most frequent response; any tie for the maximum goes to Neutral.
pub fn majority_vote(counts: &[usize; 3]) -> Option<Stance> {
    let max = *counts.iter().max()?;
    if max == 0 {
        return None;
    }
    let winners: Vec<usize> = (0..3).filter(|&k| counts[k] == max).collect();
    if winners.len() == 1 {
        Stance::from_index(winners[0])
    } else {
        Some(Stance::Neutral)
    }
}

/// 3x3 counts: rows are per-item majority vote, columns are the model's
/// argmax label, both indexed by [`Stance::index`].
pub fn compare_to_majority(fit: &AggregationFit, records: &[AnnotationRecord]) -> [[usize; 3]; 3] {
    let mut m = [[0usize; 3]; 3];
    for (item, counts) in counts_by_item(records) {
        let (Some(i), Some(maj)) = (fit.item_index(&item), majority_vote(&counts)) else {
            continue;
        };
        m[maj.index()][fit.label(i).index()] += 1;
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMetric {
    Nominal,
    #[default]
    Ordinal,
    Interval,
}

/// Krippendorff's alpha over units of coded values (missing values simply
/// absent). Values are ordered category codes. Returns `None` when fewer
/// than two pairable values exist or expected disagreement is zero.
pub fn krippendorff_alpha(units: &[Vec<u32>], metric: AlphaMetric) -> Option<f64> {
    let mut cats: Vec<u32> = units.iter().filter(|u| u.len() >= 2).flatten().copied().collect();
    cats.sort_unstable();
    cats.dedup();
    let idx: BTreeMap<u32, usize> = cats.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let k = cats.len();
    let mut o = vec![vec![0.0f64; k]; k];
    for u in units.iter().filter(|u| u.len() >= 2) {
        let m = u.len() as f64;
        for (a, &x) in u.iter().enumerate() {
            for (b, &y) in u.iter().enumerate() {
                if a != b {
                    o[idx[&x]][idx[&y]] += 1.0 / (m - 1.0);
                }
            }
        }
    }
    let nc: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = nc.iter().sum();
    if n < 2.0 {
        return None;
    }
    let delta = |c: usize, d: usize| -> f64 {
        match metric {
            AlphaMetric::Nominal => (c != d) as u8 as f64,
            AlphaMetric::Interval => {
                let diff = cats[c] as f64 - cats[d] as f64;
                diff * diff
            }
            AlphaMetric::Ordinal => {
                let (lo, hi) = (c.min(d), c.max(d));
                let s: f64 = nc[lo..=hi].iter().sum::<f64>() - (nc[lo] + nc[hi]) / 2.0;
                s * s
            }
        }
    };
    let mut d_o = 0.0;
    let mut d_e = 0.0;
    for c in 0..k {
        for d in 0..k {
            let dl = delta(c, d);
            d_o += o[c][d] * dl;
            d_e += nc[c] * nc[d] * dl;
        }
    }
    if d_e == 0.0 {
        return None;
    }
    Some(1.0 - (n - 1.0) * d_o / d_e)
}

/// Units for [`krippendorff_alpha`] from annotation records, one per item.
pub fn alpha_units(records: &[AnnotationRecord]) -> Vec<Vec<u32>> {
    let mut m: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for r in records {
        m.entry(r.item_id.as_str()).or_default().push(r.response.code() as u32);
    }
    m.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_ordering() {
        assert_eq!(entropy(&[8, 0, 0]), 0.0);
        assert!(entropy(&[3, 3, 2]) > entropy(&[8, 0, 0]));
        let h442 = entropy(&[4, 4, 0]);
        let h422 = entropy(&[4, 2, 2]);
        assert!((h442 - 2f64.ln()).abs() < 1e-12);
        assert!((h422 - (0.5 * 2f64.ln() + 0.5 * 4f64.ln())).abs() < 1e-12);
        assert!(h422 > h442);
    }

    fn recs(item: &str, counts: [usize; 3]) -> Vec<AnnotationRecord> {
        let mut out = Vec::new();
        let mut w = 0;
        for (k, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                out.push(AnnotationRecord {
                    item_id: item.into(),
                    worker_id: format!("w{w}"),
                    response: Stance::from_index(k).unwrap(),
                    round: None,
                });
                w += 1;
            }
        }
        out
    }

    #[test]
    fn hardest_ranking_and_ties() {
        let mut r = recs("b", [4, 4, 0]);
        r.extend(recs("a", [0, 0, 8]));
        r.extend(recs("c", [4, 2, 2]));
        r.extend(recs("d", [0, 4, 4]));
        let h = hardest_items(&r, 10);
        let ids: Vec<&str> = h.iter().map(|x| x.item_id.as_str()).collect();
        assert_eq!(ids, vec!["c", "b", "d", "a"]);
        assert_eq!(h[3].entropy, 0.0);
        assert_eq!(hardest_items(&r, 2).len(), 2);
    }

    #[test]
    fn majority_ties_to_neutral() {
        assert_eq!(majority_vote(&[3, 1, 1]), Some(Stance::Disagree));
        assert_eq!(majority_vote(&[3, 0, 3]), Some(Stance::Neutral));
        assert_eq!(majority_vote(&[2, 2, 1]), Some(Stance::Neutral));
        assert_eq!(majority_vote(&[0, 0, 0]), None);
    }

    /// Published reliability data with known alpha values (4 coders,
    /// 12 units, values 1..5 with gaps).
    fn reference_units() -> Vec<Vec<u32>> {
        let rows: [[Option<u32>; 12]; 4] = [
            [Some(1), Some(2), Some(3), Some(3), Some(2), Some(1), Some(4), Some(1), Some(2), None, None, None],
            [Some(1), Some(2), Some(3), Some(3), Some(2), Some(2), Some(4), Some(1), Some(2), Some(5), None, Some(3)],
            [None, Some(3), Some(3), Some(3), Some(2), Some(3), Some(4), Some(2), Some(2), Some(5), Some(1), None],
            [Some(1), Some(2), Some(3), Some(3), Some(2), Some(4), Some(4), Some(1), Some(2), Some(5), Some(1), None],
        ];
        (0..12).map(|u| rows.iter().filter_map(|r| r[u]).collect()).collect()
    }

    #[test]
    fn alpha_reference_values() {
        let u = reference_units();
        assert!((krippendorff_alpha(&u, AlphaMetric::Nominal).unwrap() - 0.743).abs() < 1e-3);
        assert!((krippendorff_alpha(&u, AlphaMetric::Ordinal).unwrap() - 0.815).abs() < 1e-3);
        assert!((krippendorff_alpha(&u, AlphaMetric::Interval).unwrap() - 0.849).abs() < 1e-3);
    }

    #[test]
    fn alpha_pairwise_oracle() {
        // Pair-counting definition for the nominal metric.
        let u = reference_units();
        let pairable: Vec<&Vec<u32>> = u.iter().filter(|x| x.len() >= 2).collect();
        let n: f64 = pairable.iter().map(|x| x.len() as f64).sum();
        let mut d_o = 0.0;
        for unit in &pairable {
            let m = unit.len() as f64;
            let mut dis = 0.0;
            for (a, x) in unit.iter().enumerate() {
                for (b, y) in unit.iter().enumerate() {
                    if a != b && x != y {
                        dis += 1.0;
                    }
                }
            }
            d_o += dis / (m - 1.0);
        }
        d_o /= n;
        let pooled: Vec<u32> = pairable.iter().flat_map(|x| x.iter().copied()).collect();
        let mut dis = 0.0;
        for (a, x) in pooled.iter().enumerate() {
            for (b, y) in pooled.iter().enumerate() {
                if a != b && x != y {
                    dis += 1.0;
                }
            }
        }
        let d_e = dis / (n * (n - 1.0));
        let alpha = 1.0 - d_o / d_e;
        assert!((krippendorff_alpha(&u, AlphaMetric::Nominal).unwrap() - alpha).abs() < 1e-12);
    }

    #[test]
    fn perfect_agreement_alpha_one() {
        let u = vec![vec![1, 1, 1], vec![3, 3], vec![2, 2, 2]];
        assert!((krippendorff_alpha(&u, AlphaMetric::Ordinal).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(krippendorff_alpha(&[vec![2, 2]], AlphaMetric::Ordinal), None);
    }
}
