//! Statistics behind the framing and attribution analyses: log-odds bias,
//! 2x2 chi-squared tests, Benjamini-Hochberg selection and correlations.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} paired values, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("paired sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("{0} has zero variance; correlation is undefined")]
    ZeroVariance(&'static str),
}

/// Counts for one device: `a` of `big_a` occurrences on one side, `d` of
/// `big_d` on the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountPair {
    pub a: u64,
    pub big_a: u64,
    pub d: u64,
    pub big_d: u64,
}

impl CountPair {
    pub fn new(a: u64, big_a: u64, d: u64, big_d: u64) -> Self {
        assert!(a <= big_a && d <= big_d, "count exceeds its total");
        CountPair { a, big_a, d, big_d }
    }

    pub fn frequency(&self) -> u64 {
        self.a + self.d
    }

    pub fn swapped(&self) -> Self {
        CountPair {
            a: self.d,
            big_a: self.big_d,
            d: self.a,
            big_d: self.big_a,
        }
    }

    fn has_zero_cell(&self) -> bool {
        self.a == 0 || self.big_a == self.a || self.d == 0 || self.big_d == self.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogOdds {
    pub value: f64,
    /// Half a count was added to all four cells.
    pub smoothed: bool,
}

fn log_odds_term(hits: f64, misses: f64) -> f64 {
    (hits / misses).ln()
}

/// `ln(a/(A-a)) - ln(d/(D-d))`. With a zero cell, adds 0.5 to every cell
/// when `smoothing` is set and returns `None` otherwise.
pub fn log_odds(c: &CountPair, smoothing: bool) -> Option<LogOdds> {
    let cells = [c.a, c.big_a - c.a, c.d, c.big_d - c.d].map(|v| v as f64);
    let zero = c.has_zero_cell();
    if zero && !smoothing {
        return None;
    }
    let add = if zero { 0.5 } else { 0.0 };
    let [a, ra, d, rd] = cells.map(|v| v + add);
    Some(LogOdds {
        value: log_odds_term(a, ra) - log_odds_term(d, rd),
        smoothed: zero,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquaredTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Pearson chi-squared test of independence on `[[a, A-a], [d, D-d]]`.
/// A table with an empty row or column gives statistic 0 and p = 1.
pub fn chi_squared_2x2(c: &CountPair, yates: bool) -> ChiSquaredTest {
    let (a, b) = (c.a as f64, (c.big_a - c.a) as f64);
    let (d, e) = (c.d as f64, (c.big_d - c.d) as f64);
    let n = a + b + d + e;
    let margins = [a + b, d + e, a + d, b + e];
    if margins.iter().any(|&m| m == 0.0) {
        return ChiSquaredTest {
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let mut diff = (a * e - b * d).abs();
    if yates {
        diff = (diff - n / 2.0).max(0.0);
    }
    let statistic = n * diff * diff / margins.iter().product::<f64>();
    let dist = ChiSquared::new(1.0).expect("one degree of freedom");
    ChiSquaredTest {
        statistic,
        p_value: dist.sf(statistic).clamp(0.0, 1.0),
    }
}

/// Benjamini-Hochberg step-up selection at false discovery rate `fdr`.
/// Non-finite p-values are never rejected.
pub fn benjamini_hochberg(p_values: &[f64], fdr: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    let key = |i: usize| if p_values[i].is_finite() { p_values[i] } else { f64::INFINITY };
    order.sort_by(|&i, &j| key(i).total_cmp(&key(j)).then(i.cmp(&j)));
    let cutoff = (0..m)
        .rev()
        .find(|&r| key(order[r]) <= (r + 1) as f64 / m as f64 * fdr)
        .map_or(0, |r| r + 1);
    let mut reject = vec![false; m];
    for &i in &order[..cutoff] {
        reject[i] = true;
    }
    reject
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

fn check_pairs(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewPoints { needed: 3, got: x.len() });
    }
    Ok(())
}

/// Pearson correlation with a two-sided p-value from the t transform.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation, StatsError> {
    check_pairs(x, y)?;
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StatsError::ZeroVariance("first sequence"));
    }
    if syy == 0.0 {
        return Err(StatsError::ZeroVariance("second sequence"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = n - 2.0;
    let p_value = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(Correlation {
        r,
        p_value,
        n: x.len(),
    })
}

/// Ranks starting at 1, ties receiving their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation, StatsError> {
    check_pairs(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_odds_examples() {
        let b = log_odds(&CountPair::new(5, 20, 5, 20), true).unwrap();
        assert_eq!(b.value, 0.0);
        assert!(!b.smoothed);
        let b = log_odds(&CountPair::new(2, 10, 1, 10), true).unwrap();
        assert!((b.value - ((2.0f64 / 8.0).ln() - (1.0f64 / 9.0).ln())).abs() < 1e-12);
        assert!((b.value - 0.8109).abs() < 1e-4);
        let b = log_odds(&CountPair::new(0, 10, 3, 10), true).unwrap();
        assert!(b.smoothed && b.value.is_finite() && b.value < 0.0);
        assert_eq!(log_odds(&CountPair::new(0, 10, 3, 10), false), None);
    }

    #[test]
    fn chi_squared_independent_margins() {
        let t = chi_squared_2x2(&CountPair::new(10, 30, 20, 60), false);
        assert_eq!(t.statistic, 0.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
        assert_eq!(chi_squared_2x2(&CountPair::new(0, 0, 3, 9), false).p_value, 1.0);
    }

    #[test]
    fn chi_squared_reference() {
        // [[12, 5], [7, 16]]: n = 40, ad - bc = 157.
        let t = chi_squared_2x2(&CountPair::new(12, 17, 7, 23), false);
        let expected = 40.0 * 157.0f64.powi(2) / (17.0 * 23.0 * 19.0 * 21.0);
        assert!((t.statistic - expected).abs() < 1e-12);
        // Tabulated upper tail of chi-squared(1) at 3.841459 is 0.05.
        let dist = ChiSquared::new(1.0).unwrap();
        assert!((dist.sf(3.841459) - 0.05).abs() < 1e-6);
        let y = chi_squared_2x2(&CountPair::new(12, 17, 7, 23), true);
        assert!(y.statistic < t.statistic);
    }

    #[test]
    fn bh_example() {
        assert_eq!(benjamini_hochberg(&[0.01, 0.02, 0.04, 0.5], 0.1), vec![true, true, true, false]);
        assert_eq!(benjamini_hochberg(&[0.5, 0.04, 0.01, 0.02], 0.1), vec![false, true, true, true]);
        assert!(benjamini_hochberg(&[], 0.1).is_empty());
        assert_eq!(benjamini_hochberg(&[f64::NAN, 0.001], 0.1), vec![false, true]);
    }

    fn brute_bh(p: &[f64], q: f64) -> Vec<bool> {
        let m = p.len();
        let mut best = 0;
        for k in 1..=m {
            let below = p.iter().filter(|&&x| x <= k as f64 / m as f64 * q).count();
            if below >= k {
                best = k;
            }
        }
        let thr = best as f64 / m as f64 * q;
        p.iter().map(|&x| best > 0 && x <= thr).collect()
    }

    #[test]
    fn bh_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let m = rng.gen_range(1..25);
            let p: Vec<f64> = (0..m).map(|_| rng.gen::<f64>().powi(3)).collect();
            assert_eq!(benjamini_hochberg(&p, 0.1), brute_bh(&p, 0.1));
        }
    }

    #[test]
    fn pearson_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let c = pearson(&x, &x).unwrap();
        assert_eq!(c.r, 1.0);
        assert_eq!(c.p_value, 0.0);
        assert_eq!(pearson(&x, &[2.0; 4]), Err(StatsError::ZeroVariance("second sequence")));
        assert!(matches!(pearson(&x[..2], &x[..2]), Err(StatsError::TooFewPoints { .. })));
        // r = 0.8 with n = 10 has two-sided p of about 0.00545.
        let t = 0.8 * (8.0f64 / 0.36).sqrt();
        let p = 2.0 * StudentsT::new(0.0, 1.0, 8.0).unwrap().sf(t);
        assert!((p - 0.00545).abs() < 1e-4);
    }

    #[test]
    fn spearman_handles_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        let c = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 4.0, 9.0, 16.0]).unwrap();
        assert!((c.r - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn log_odds_antisymmetric(a in 0u64..60, ra in 0u64..60, d in 0u64..60, rd in 0u64..60) {
            let c = CountPair::new(a, a + ra, d, d + rd);
            let (x, y) = (log_odds(&c, true).unwrap(), log_odds(&c.swapped(), true).unwrap());
            prop_assert_eq!(x.value, -y.value);
        }

        #[test]
        fn log_odds_scale_invariant(a in 1u64..60, ra in 1u64..60, d in 1u64..60, rd in 1u64..60, k in 1u64..50) {
            let c = CountPair::new(a, a + ra, d, d + rd);
            let s = CountPair::new(k * a, k * (a + ra), k * d, k * (d + rd));
            prop_assert_eq!(log_odds(&c, false).unwrap().value, log_odds(&s, false).unwrap().value);
        }

        #[test]
        fn bh_monotone_in_fdr(p in proptest::collection::vec(0.0f64..1.0, 0..30)) {
            let lo = benjamini_hochberg(&p, 0.05);
            let hi = benjamini_hochberg(&p, 0.1);
            prop_assert!(lo.iter().zip(&hi).all(|(l, h)| !l || *h));
        }
    }
}
