use opframe::extraction::gold::{evaluate_fixtures, parse_gold};
use opframe::extraction::{DeprelMap, ExtractionConfig, FilterLexicons};

const CORPUS: &str = include_str!("../data/fixtures/fixtures.conllu");
const GOLD: &str = include_str!("../data/fixtures/gold.tsv");

#[test]
fn fixture_corpus_recall_and_precision() {
    let gold = parse_gold(GOLD).unwrap();
    let r = evaluate_fixtures(
        CORPUS,
        &gold,
        &DeprelMap::default(),
        &FilterLexicons::shipped(),
        &ExtractionConfig::default(),
    )
    .unwrap();
    assert!(r.sentences >= 25);
    assert!(r.problems.is_empty(), "{:#?}", r.problems);
    assert_eq!(r.extracted, r.gold_clauses);
    assert_eq!(r.recall(), 1.0);
    assert_eq!(r.precision(), 1.0);
    assert_eq!(r.kept, r.gold_keep);
}
