use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{best_match, is_faithful, EntityMatch, EntityRoster, EntityStance, FaithfulnessError, MatchConfig};
use crate::corpus::Leaning;
use crate::extraction::TupleRecord;
use crate::framing::own_stance;
use crate::label::Stance;
use crate::stats::{benjamini_hochberg, chi_squared_2x2, log_odds, CountPair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub tuple_id: String,
    pub article_id: String,
    pub leaning: Leaning,
    pub source: String,
    pub canonical_entity: String,
    pub entity_stance: EntityStance,
    pub opinion_stance: Stance,
    pub faithful: bool,
    pub match_score: f64,
    pub predicate: String,
    pub opinion_text: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub matched: u64,
    pub unfaithful: u64,
    /// Zero when nothing matched.
    pub unfaithful_rate: f64,
}

impl RateSummary {
    fn from_counts(matched: u64, unfaithful: u64) -> Self {
        RateSummary {
            matched,
            unfaithful,
            unfaithful_rate: if matched == 0 { 0.0 } else { unfaithful as f64 / matched as f64 },
        }
    }
}

/// A below-threshold pairing of a source string with a roster entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewCandidate {
    pub canonical_entity: String,
    pub source: String,
    pub score: f64,
    /// Labelled non-neutral tuples carrying this source string.
    pub occurrences: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    /// Most frequent entities first.
    pub records: Vec<AttributionRecord>,
    /// Every leaning present, including unknown.
    pub per_leaning: BTreeMap<Leaning, RateSummary>,
    pub pooled: RateSummary,
    pub review: Vec<ReviewCandidate>,
}

/// Labelled, non-neutral tuples with their leaning.
fn eligible<'a>(
    records: &'a [TupleRecord],
    labels: &BTreeMap<String, Stance>,
    leanings: &BTreeMap<String, Leaning>,
) -> Vec<(&'a TupleRecord, Stance, Leaning)> {
    records
        .iter()
        .filter_map(|r| {
            let label = *labels.get(&r.tuple_id)?;
            (label != Stance::Neutral).then(|| {
                let leaning = leanings.get(&r.tuple.article_id).copied().unwrap_or_default();
                (r, label, leaning)
            })
        })
        .collect()
}

fn match_sources(
    items: &[(&TupleRecord, Stance, Leaning)],
    roster: &EntityRoster,
) -> BTreeMap<String, Option<EntityMatch>> {
    let sources: BTreeSet<&str> = items.iter().map(|(r, _, _)| r.tuple.source_canonical.as_str()).collect();
    let sources: Vec<&str> = sources.into_iter().collect();
    sources.par_iter().map(|s| (s.to_string(), best_match(s, roster))).collect()
}

/// Unfaithful-attribution rates over tuples whose source matches the roster.
pub fn faithfulness_report(
    records: &[TupleRecord],
    labels: &BTreeMap<String, Stance>,
    leanings: &BTreeMap<String, Leaning>,
    roster: &EntityRoster,
    config: &MatchConfig,
) -> FaithfulnessReport {
    let items = eligible(records, labels, leanings);
    let matches = match_sources(&items, roster);
    let mut out = Vec::new();
    let mut review: BTreeMap<(String, String), (f64, u64)> = BTreeMap::new();
    for &(r, label, leaning) in &items {
        let Some(m) = &matches[r.tuple.source_canonical.as_str()] else {
            continue;
        };
        if m.score >= config.threshold {
            out.push(AttributionRecord {
                tuple_id: r.tuple_id.clone(),
                article_id: r.tuple.article_id.clone(),
                leaning,
                source: r.tuple.source_canonical.clone(),
                canonical_entity: m.canonical.clone(),
                entity_stance: m.stance,
                opinion_stance: label,
                faithful: is_faithful(m.stance, label),
                match_score: m.score,
                predicate: r.tuple.predicate_phrase(),
                opinion_text: r.opinion_text.clone(),
            });
        } else if m.score >= config.review_floor {
            let e = review.entry((m.canonical.clone(), r.tuple.source_canonical.clone())).or_insert((m.score, 0));
            e.1 += 1;
        }
    }

    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &out {
        *freq.entry(a.canonical_entity.as_str()).or_default() += 1;
    }
    let freq: BTreeMap<String, usize> = freq.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    out.sort_by(|a, b| {
        freq[&b.canonical_entity]
            .cmp(&freq[&a.canonical_entity])
            .then_with(|| a.canonical_entity.cmp(&b.canonical_entity))
            .then_with(|| a.tuple_id.cmp(&b.tuple_id))
    });

    let mut counts: BTreeMap<Leaning, (u64, u64)> = BTreeMap::new();
    for a in &out {
        let c = counts.entry(a.leaning).or_default();
        c.0 += 1;
        c.1 += u64::from(!a.faithful);
    }
    let per_leaning = counts.iter().map(|(&l, &(m, u))| (l, RateSummary::from_counts(m, u))).collect();
    let (m, u) = counts.values().fold((0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1));

    let mut grouped: BTreeMap<String, Vec<ReviewCandidate>> = BTreeMap::new();
    for ((canonical, source), (score, occurrences)) in review {
        grouped.entry(canonical.clone()).or_default().push(ReviewCandidate {
            canonical_entity: canonical,
            source,
            score,
            occurrences,
        });
    }
    let mut review = Vec::new();
    for (_, mut v) in grouped {
        v.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| b.occurrences.cmp(&a.occurrences))
                .then_with(|| a.source.cmp(&b.source))
        });
        v.truncate(config.review_limit);
        review.extend(v);
    }

    FaithfulnessReport {
        records: out,
        per_leaning,
        pooled: RateSummary::from_counts(m, u),
        review,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HypocrisyConfig {
    /// Predicates with fewer own-stance matched uses are skipped.
    pub min_freq: u64,
    pub fdr: f64,
    pub smoothing: bool,
    pub yates: bool,
}

impl Default for HypocrisyConfig {
    fn default() -> Self {
        HypocrisyConfig {
            min_freq: 1,
            fdr: 0.1,
            smoothing: true,
            yates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypocrisyPredicate {
    pub predicate: String,
    pub leaning: Leaning,
    /// Uses with a source of the opposing stance, and that group's total.
    pub a: u64,
    pub big_a: u64,
    /// Uses with a source sharing the leaning's stance, and that total.
    pub d: u64,
    pub big_d: u64,
    pub log_odds: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Per leaning, predicates over-used when an own-stance opinion is ascribed
/// to an entity of the opposing stance rather than an aligned one. Only
/// positive log-odds are listed, largest first.
pub fn hypocrisy_predicates(records: &[AttributionRecord], config: &HypocrisyConfig) -> BTreeMap<Leaning, Vec<HypocrisyPredicate>> {
    let mut out = BTreeMap::new();
    for leaning in [Leaning::Left, Leaning::Right] {
        let own = own_stance(leaning).expect("known leaning");
        let mut opposing: BTreeMap<&str, u64> = BTreeMap::new();
        let mut aligned: BTreeMap<&str, u64> = BTreeMap::new();
        let (mut total_opp, mut total_al) = (0u64, 0u64);
        for r in records.iter().filter(|r| r.leaning == leaning && r.opinion_stance == own) {
            if r.entity_stance.held_stance() == own {
                total_al += 1;
                *aligned.entry(&r.predicate).or_default() += 1;
            } else {
                total_opp += 1;
                *opposing.entry(&r.predicate).or_default() += 1;
            }
        }
        let predicates: BTreeSet<&str> = opposing.keys().chain(aligned.keys()).copied().collect();
        let mut rows = Vec::new();
        for p in predicates {
            let a = opposing.get(p).copied().unwrap_or(0);
            let d = aligned.get(p).copied().unwrap_or(0);
            if a + d < config.min_freq {
                continue;
            }
            let c = CountPair::new(a, total_opp, d, total_al);
            let Some(b) = log_odds(&c, config.smoothing) else {
                continue;
            };
            rows.push(HypocrisyPredicate {
                predicate: p.to_string(),
                leaning,
                a,
                big_a: total_opp,
                d,
                big_d: total_al,
                log_odds: b.value,
                p_value: chi_squared_2x2(&c, config.yates).p_value,
                significant: false,
            });
        }
        let p: Vec<f64> = rows.iter().map(|r| r.p_value).collect();
        for (r, s) in rows.iter_mut().zip(benjamini_hochberg(&p, config.fdr)) {
            r.significant = s;
        }
        rows.retain(|r| r.log_odds > 0.0);
        rows.sort_by(|x, y| y.log_odds.total_cmp(&x.log_odds).then_with(|| x.predicate.cmp(&y.predicate)));
        out.insert(leaning, rows);
    }
    out
}

pub fn write_attributions_csv<W: Write>(w: W, records: &[AttributionRecord]) -> Result<(), FaithfulnessError> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| FaithfulnessError::Io("attributions".into(), e))?;
    Ok(())
}

pub fn write_review_csv<W: Write>(w: W, review: &[ReviewCandidate]) -> Result<(), FaithfulnessError> {
    let mut out = csv::Writer::from_writer(w);
    for r in review {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| FaithfulnessError::Io("review".into(), e))?;
    Ok(())
}

pub fn write_hypocrisy_csv<W: Write>(
    w: W,
    lists: &BTreeMap<Leaning, Vec<HypocrisyPredicate>>,
) -> Result<(), FaithfulnessError> {
    let mut out = csv::Writer::from_writer(w);
    for r in lists.values().flatten() {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| FaithfulnessError::Io("hypocrisy".into(), e))?;
    Ok(())
}
