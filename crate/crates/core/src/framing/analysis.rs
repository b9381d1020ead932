use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Leaning;
use crate::extraction::TupleRecord;
use crate::label::Stance;
use crate::stats::{benjamini_hochberg, chi_squared_2x2, log_odds, pearson, Correlation, CountPair, StatsError};

use super::{own_stance, tag_devices, FramingError, FramingLexicon, Polarity, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FramingConfig {
    /// Devices seen fewer times than this (agree plus disagree) are left out.
    pub min_freq: u64,
    pub fdr: f64,
    pub smoothing: bool,
    pub yates: bool,
}

impl Default for FramingConfig {
    fn default() -> Self {
        FramingConfig {
            min_freq: 20,
            fdr: 0.1,
            smoothing: true,
            yates: false,
        }
    }
}

/// Agree/disagree tallies within one leaning, overall and per device index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LeaningTally {
    pub agree_total: u64,
    pub disagree_total: u64,
    pub agree: BTreeMap<usize, u64>,
    pub disagree: BTreeMap<usize, u64>,
}

impl LeaningTally {
    fn merge(mut self, other: LeaningTally) -> LeaningTally {
        self.agree_total += other.agree_total;
        self.disagree_total += other.disagree_total;
        for (k, v) in other.agree {
            *self.agree.entry(k).or_default() += v;
        }
        for (k, v) in other.disagree {
            *self.disagree.entry(k).or_default() += v;
        }
        self
    }
}

fn merge_maps(mut a: BTreeMap<Leaning, LeaningTally>, b: BTreeMap<Leaning, LeaningTally>) -> BTreeMap<Leaning, LeaningTally> {
    for (k, v) in b {
        let cur = a.remove(&k).unwrap_or_default();
        a.insert(k, cur.merge(v));
    }
    a
}

fn context(
    r: &TupleRecord,
    labels: &BTreeMap<String, Stance>,
    leanings: &BTreeMap<String, Leaning>,
) -> Option<(Leaning, Stance)> {
    let leaning = *leanings.get(&r.tuple.article_id)?;
    if leaning == Leaning::Unknown {
        return None;
    }
    Some((leaning, *labels.get(&r.tuple_id)?))
}

/// Counts each tuple once per device it carries. Tuples without a label, of
/// unknown leaning, or from articles outside `leanings` are skipped.
pub fn device_counts(
    records: &[TupleRecord],
    labels: &BTreeMap<String, Stance>,
    leanings: &BTreeMap<String, Leaning>,
    lexicon: &FramingLexicon,
) -> BTreeMap<Leaning, LeaningTally> {
    let index: BTreeMap<&str, usize> = lexicon.devices.iter().enumerate().map(|(i, d)| (d.name.as_str(), i)).collect();
    records
        .par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<Leaning, LeaningTally>, r| {
            let Some((leaning, label)) = context(r, labels, leanings) else {
                return acc;
            };
            if label == Stance::Neutral {
                return acc;
            }
            let tally = acc.entry(leaning).or_default();
            let (total, per) = if label == Stance::Agree {
                (&mut tally.agree_total, &mut tally.agree)
            } else {
                (&mut tally.disagree_total, &mut tally.disagree)
            };
            *total += 1;
            for d in tag_devices(r, lexicon) {
                *per.entry(index[d.name.as_str()]).or_default() += 1;
            }
            acc
        })
        .reduce(BTreeMap::new, merge_maps)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DeviceKey {
    pub device: String,
    pub leaning: Leaning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramingStat {
    pub device: String,
    pub category: String,
    pub polarity: Polarity,
    pub slot: Slot,
    pub leaning: Leaning,
    pub a: u64,
    pub big_a: u64,
    pub d: u64,
    pub big_d: u64,
    /// Absent when a cell is zero and smoothing is off.
    pub log_odds: Option<f64>,
    pub smoothed: bool,
    pub chi_squared: f64,
    pub p_value: f64,
    pub significant: bool,
}

impl FramingStat {
    pub fn key(&self) -> DeviceKey {
        DeviceKey {
            device: self.device.clone(),
            leaning: self.leaning,
        }
    }
}

/// Log-odds, chi-squared p-values and Benjamini-Hochberg flags for every
/// device reaching the frequency floor. Each (leaning, slot) pair is one
/// testing family.
pub fn framing_table(
    counts: &BTreeMap<Leaning, LeaningTally>,
    lexicon: &FramingLexicon,
    config: &FramingConfig,
) -> Vec<FramingStat> {
    let mut stats = Vec::new();
    for (&leaning, tally) in counts {
        for slot in [Slot::Predicate, Slot::SourceModifier] {
            let start = stats.len();
            for (i, device) in lexicon.devices.iter().enumerate() {
                if device.slot != slot {
                    continue;
                }
                let a = tally.agree.get(&i).copied().unwrap_or(0);
                let d = tally.disagree.get(&i).copied().unwrap_or(0);
                if a + d < config.min_freq || a + d == 0 {
                    continue;
                }
                let c = CountPair::new(a, tally.agree_total, d, tally.disagree_total);
                let lo = log_odds(&c, config.smoothing);
                let test = chi_squared_2x2(&c, config.yates);
                stats.push(FramingStat {
                    device: device.name.clone(),
                    category: device.category.clone(),
                    polarity: device.polarity,
                    slot,
                    leaning,
                    a,
                    big_a: tally.agree_total,
                    d,
                    big_d: tally.disagree_total,
                    log_odds: lo.map(|l| l.value),
                    smoothed: lo.is_some_and(|l| l.smoothed),
                    chi_squared: test.statistic,
                    p_value: test.p_value,
                    significant: false,
                });
            }
            let family = &mut stats[start..];
            let p: Vec<f64> = family.iter().map(|s| s.p_value).collect();
            for (s, r) in family.iter_mut().zip(benjamini_hochberg(&p, config.fdr)) {
                s.significant = r;
            }
        }
    }
    stats
}

/// Pearson correlation of log-odds between two tables over the devices (and
/// leanings) both contain with finite values, optionally one slot only.
pub fn robustness_correlation(
    full: &[FramingStat],
    subset: &[FramingStat],
    slot: Option<Slot>,
) -> Result<Correlation, StatsError> {
    let keep = |s: &&FramingStat| slot.is_none_or(|x| s.slot == x) && s.log_odds.is_some();
    let other: BTreeMap<DeviceKey, f64> = subset.iter().filter(keep).map(|s| (s.key(), s.log_odds.unwrap())).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = full
        .iter()
        .filter(keep)
        .filter_map(|s| other.get(&s.key()).map(|&b| (s.log_odds.unwrap(), b)))
        .unzip();
    pearson(&x, &y)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageCounts {
    /// Own-stance opinion with an affirming device.
    pub self_affirming: u64,
    /// Opposite-stance opinion with a doubting device.
    pub opponent_doubting: u64,
    /// Carries a device, but not in either of the two patterns above.
    pub other_framed: u64,
    /// No lexicon device at all.
    pub residual: u64,
}

impl CoverageCounts {
    pub fn total(&self) -> u64 {
        self.self_affirming + self.opponent_doubting + self.other_framed + self.residual
    }

    /// Shares in field order; all zero for an empty leaning.
    pub fn proportions(&self) -> [f64; 4] {
        let t = self.total();
        if t == 0 {
            return [0.0; 4];
        }
        let t = t as f64;
        [
            self.self_affirming as f64 / t,
            self.opponent_doubting as f64 / t,
            self.other_framed as f64 / t,
            self.residual as f64 / t,
        ]
    }

    fn add(mut self, o: CoverageCounts) -> CoverageCounts {
        self.self_affirming += o.self_affirming;
        self.opponent_doubting += o.opponent_doubting;
        self.other_framed += o.other_framed;
        self.residual += o.residual;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageBreakdown {
    pub per_leaning: BTreeMap<Leaning, CoverageCounts>,
}

/// Discourse type of every non-neutral labelled tuple per leaning.
pub fn coverage_breakdown(
    records: &[TupleRecord],
    labels: &BTreeMap<String, Stance>,
    leanings: &BTreeMap<String, Leaning>,
    lexicon: &FramingLexicon,
) -> CoverageBreakdown {
    let per_leaning = records
        .par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<Leaning, CoverageCounts>, r| {
            let Some((leaning, label)) = context(r, labels, leanings) else {
                return acc;
            };
            let own = own_stance(leaning).expect("known leaning");
            if label == Stance::Neutral {
                return acc;
            }
            let devices = tag_devices(r, lexicon);
            let has = |p: Polarity| devices.iter().any(|d| d.polarity == p);
            let c = acc.entry(leaning).or_default();
            if devices.is_empty() {
                c.residual += 1;
            } else if label == own && has(Polarity::Affirming) {
                c.self_affirming += 1;
            } else if label == own.opposite() && has(Polarity::Doubting) {
                c.opponent_doubting += 1;
            } else {
                c.other_framed += 1;
            }
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                let cur = a.remove(&k).unwrap_or_default();
                a.insert(k, cur.add(v));
            }
            a
        });
    CoverageBreakdown { per_leaning }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

/// One CSV row per statistic.
pub fn write_framing_csv<W: Write>(w: W, stats: &[FramingStat]) -> Result<(), FramingError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "device", "category", "polarity", "slot", "leaning", "a", "A", "d", "D", "log_odds", "smoothed", "chi_squared",
        "p_value", "significant",
    ])?;
    for s in stats {
        out.write_record([
            s.device.clone(),
            s.category.clone(),
            s.polarity.as_str().to_string(),
            s.slot.as_str().to_string(),
            s.leaning.short().to_string(),
            s.a.to_string(),
            s.big_a.to_string(),
            s.d.to_string(),
            s.big_d.to_string(),
            fmt_opt(s.log_odds),
            s.smoothed.to_string(),
            format!("{}", s.chi_squared),
            format!("{}", s.p_value),
            s.significant.to_string(),
        ])?;
    }
    out.flush().map_err(|e| FramingError::Io("framing csv".into(), e))?;
    Ok(())
}
