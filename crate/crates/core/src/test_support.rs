use crate::extraction::{OpinionTuple, TupleRecord};

pub(crate) fn record(id: usize, article: &str, predicate: &str, particle: Option<&str>, modifiers: &[&str]) -> TupleRecord {
    let tuple = OpinionTuple {
        article_id: article.into(),
        sentence_index: id,
        source_tokens: vec![1],
        source_head: Some(1),
        source_canonical: "scientists".into(),
        source_modifiers: Vec::new(),
        predicate: 2,
        predicate_lemma: predicate.into(),
        predicate_particle: particle.map(str::to_string),
        predicate_modifiers: Vec::new(),
        opinion_root: 4,
        opinion_tokens: vec![3, 4],
        negated: false,
        modal: false,
        complementizer: None,
        complementizer_index: None,
    };
    TupleRecord {
        tuple_id: tuple.tuple_id(),
        tuple,
        source_text: "scientists".into(),
        predicate_text: predicate.into(),
        opinion_text: "it warms".into(),
        sentence_text: String::new(),
        source_modifier_lemmas: modifiers.iter().map(|m| m.to_string()).collect(),
        annotation_text: None,
    }
}

/// Same as [`record`] with a given source string.
pub(crate) fn sourced(id: usize, article: &str, source: &str, predicate: &str) -> TupleRecord {
    let mut r = record(id, article, predicate, None, &[]);
    r.tuple.source_canonical = source.into();
    r.source_text = source.into();
    r.tuple_id = r.tuple.tuple_id();
    r
}
