use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::*;
use crate::test_support::record;
use crate::stats::StatsError;

fn names(r: &TupleRecord, lex: &FramingLexicon) -> Vec<(String, Polarity, Slot)> {
    tag_devices(r, lex).into_iter().map(|d| (d.name.clone(), d.polarity, d.slot)).collect()
}

#[test]
fn shipped_lexicon_shape() {
    let lex = FramingLexicon::shipped();
    let cats: std::collections::BTreeSet<&str> = lex.devices.iter().map(|d| d.category.as_str()).collect();
    assert_eq!(cats.len(), 11);
    // Two entries repeat inside their own list and collapse to one device.
    assert_eq!(lex.devices.len(), 20 + 7 + 4 + 38 + 11 + 5 + 3 + 11 + 7 + 47 + 6 - 2);
    assert_eq!(lex.device("peer-reviewed").unwrap().polarity, Polarity::Affirming);
    assert_eq!(lex.device("nobel laureate").unwrap().slot, Slot::SourceModifier);
}

#[test]
fn examples_tag_as_expected() {
    let lex = FramingLexicon::shipped();
    assert_eq!(
        names(&record(0, "a", "claim", None, &[]), &lex),
        vec![("claim".to_string(), Polarity::Doubting, Slot::Predicate)]
    );
    assert_eq!(
        names(&record(0, "a", "say", None, &["peer-reviewed"]), &lex),
        vec![("peer-reviewed".to_string(), Polarity::Affirming, Slot::SourceModifier)]
    );
    assert!(names(&record(0, "a", "mention", None, &[]), &lex).is_empty());
    assert_eq!(names(&record(0, "a", "point", Some("out"), &[]), &lex)[0].0, "point out");
    assert!(names(&record(0, "a", "point", None, &[]), &lex).is_empty());
}

#[test]
fn multiword_and_hyphenated_modifiers() {
    let lex = FramingLexicon::shipped();
    let hit = names(&record(0, "a", "say", None, &["the", "nobel", "prize", "winning", "chemist"]), &lex);
    let found: Vec<&str> = hit.iter().map(|h| h.0.as_str()).collect();
    assert!(found.contains(&"nobel prize winning"));
    assert!(found.contains(&"prize winning"));
    assert!(found.contains(&"nobel"));
    let split = names(&record(0, "a", "say", None, &["so", "-", "called"]), &lex);
    assert_eq!(split[0].0, "so-called");
    let dropped = names(&record(0, "a", "say", None, &["peer", "reviewed"]), &lex);
    assert_eq!(dropped[0].0, "peer-reviewed");
    assert!(names(&record(0, "a", "say", None, &["prize", "the", "winning"]), &lex).is_empty());
}

#[test]
fn cross_category_duplicate_rejected() {
    let text = r#"
        [[category]]
        name = "x"
        polarity = "affirming"
        slot = "predicate"
        entries = ["show"]
        [[category]]
        name = "y"
        polarity = "doubting"
        slot = "predicate"
        entries = ["Show"]
    "#;
    assert!(matches!(FramingLexicon::from_toml_str(text), Err(FramingError::DuplicateEntry { .. })));
}

fn context(recs: &[(TupleRecord, Stance, Leaning)]) -> (Vec<TupleRecord>, BTreeMap<String, Stance>, BTreeMap<String, Leaning>) {
    let records = recs.iter().map(|r| r.0.clone()).collect();
    let labels = recs.iter().map(|r| (r.0.tuple_id.clone(), r.1)).collect();
    let leanings = recs.iter().map(|r| (r.0.tuple.article_id.clone(), r.2)).collect();
    (records, labels, leanings)
}

#[test]
fn coverage_examples() {
    let lex = FramingLexicon::shipped();
    let (records, labels, leanings) = context(&[
        (record(0, "l1", "show", None, &[]), Stance::Agree, Leaning::Left),
        (record(1, "r1", "say", None, &["misleading"]), Stance::Agree, Leaning::Right),
        (record(2, "l2", "say", None, &[]), Stance::Disagree, Leaning::Left),
        (record(3, "l3", "claim", None, &[]), Stance::Agree, Leaning::Left),
        (record(4, "l4", "show", None, &[]), Stance::Neutral, Leaning::Left),
    ]);
    let cov = coverage_breakdown(&records, &labels, &leanings, &lex);
    let left = cov.per_leaning[&Leaning::Left];
    assert_eq!(
        left,
        CoverageCounts {
            self_affirming: 1,
            opponent_doubting: 0,
            other_framed: 1,
            residual: 1
        }
    );
    assert_eq!(cov.per_leaning[&Leaning::Right].opponent_doubting, 1);
}

#[test]
fn table_flags_follow_bh_and_frequency_floor() {
    let lex = FramingLexicon::shipped();
    let mut recs = Vec::new();
    let mut n = 0;
    let mut push = |pred: &str, label: Stance, k: usize, recs: &mut Vec<(TupleRecord, Stance, Leaning)>| {
        for _ in 0..k {
            recs.push((record(n, &format!("a{n}"), pred, None, &[]), label, Leaning::Left));
            n += 1;
        }
    };
    push("show", Stance::Agree, 40, &mut recs);
    push("show", Stance::Disagree, 5, &mut recs);
    push("claim", Stance::Agree, 10, &mut recs);
    push("claim", Stance::Disagree, 12, &mut recs);
    push("know", Stance::Agree, 3, &mut recs);
    push("say", Stance::Agree, 50, &mut recs);
    push("say", Stance::Disagree, 60, &mut recs);
    let (records, labels, leanings) = context(&recs);
    let counts = device_counts(&records, &labels, &leanings, &lex);
    let stats = framing_table(&counts, &lex, &FramingConfig::default());
    let devices: Vec<&str> = stats.iter().map(|s| s.device.as_str()).collect();
    assert_eq!(devices, ["show", "claim"]);
    let show = &stats[0];
    assert_eq!((show.a, show.big_a, show.d, show.big_d), (40, 103, 5, 77));
    let expected = (40.0f64 / 63.0).ln() - (5.0f64 / 72.0).ln();
    assert!((show.log_odds.unwrap() - expected).abs() < 1e-12);
    let p: Vec<f64> = stats.iter().map(|s| s.p_value).collect();
    let flags: Vec<bool> = stats.iter().map(|s| s.significant).collect();
    assert_eq!(flags, crate::stats::benjamini_hochberg(&p, 0.1));
    assert!(show.significant);
}

#[test]
fn robustness_cases() {
    let lex = FramingLexicon::shipped();
    let mk = |values: &[f64]| -> Vec<FramingStat> {
        values
            .iter()
            .zip(&lex.devices)
            .map(|(&b, d)| FramingStat {
                device: d.name.clone(),
                category: d.category.clone(),
                polarity: d.polarity,
                slot: d.slot,
                leaning: Leaning::Left,
                a: 1,
                big_a: 2,
                d: 1,
                big_d: 2,
                log_odds: Some(b),
                smoothed: false,
                chi_squared: 0.0,
                p_value: 1.0,
                significant: false,
            })
            .collect()
    };
    let base: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
    let r = robustness_correlation(&mk(&base), &mk(&base), None).unwrap();
    assert!((r.r - 1.0).abs() < 1e-12);
    assert!(matches!(
        robustness_correlation(&mk(&base), &mk(&[0.5; 30]), None),
        Err(StatsError::ZeroVariance(_))
    ));

    let mut means = Vec::new();
    for sigma in [0.05, 0.3, 1.0, 3.0] {
        let mut total = 0.0;
        for seed in 0..40 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, sigma).unwrap();
            let noisy: Vec<f64> = base.iter().map(|b| b + noise.sample(&mut rng)).collect();
            total += robustness_correlation(&mk(&base), &mk(&noisy), None).unwrap().r;
        }
        means.push(total / 40.0);
    }
    assert!(means.windows(2).all(|w| w[0] > w[1]), "{means:?}");
}

proptest! {
    #[test]
    fn coverage_shares_sum_to_one(labels in proptest::collection::vec((0usize..3, 0usize..4, any::<bool>()), 1..60)) {
        let lex = FramingLexicon::shipped();
        let preds = ["show", "claim", "say", "argue"];
        let recs: Vec<(TupleRecord, Stance, Leaning)> = labels
            .iter()
            .enumerate()
            .map(|(i, &(l, p, left))| {
                let leaning = if left { Leaning::Left } else { Leaning::Right };
                (record(i, &format!("a{i}"), preds[p], None, &[]), Stance::from_index(l).unwrap(), leaning)
            })
            .collect();
        let (records, labels, leanings) = context(&recs);
        let cov = coverage_breakdown(&records, &labels, &leanings, &lex);
        for c in cov.per_leaning.values() {
            prop_assert!((c.proportions().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
