//! (SOURCE, PREDICATE, OPINION) tuples from dependency parses.
//!
//! Every clausal complement yields one tuple. The predicate is the head of
//! the complement root; the source is the predicate's subject, or the noun a
//! participial predicate modifies, or the antecedent of a relative pronoun.

mod config;
mod filters;
pub mod gold;
mod lexicons;
mod record;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{subtree, ParsedSentence};

pub use config::{DeprelMap, ExtractionConfig};
pub use filters::{
    filter_implicative_scope, filter_indicative, filter_indirect_questions, filter_polarity, filter_topic,
    render_annotation_text, run_pipeline, select_annotation_candidates, PipelineOutcome, StageCounts,
};
pub use lexicons::{parse_list, FilterLexicons};
pub use record::{read_tuples, write_tuples, TupleRecord};

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("invalid deprel map: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Conllu(#[from] crate::conllu::ConlluError),
    #[error("indicative verb lexicon is empty")]
    EmptyIndicativeLexicon,
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpinionTuple {
    pub article_id: String,
    pub sentence_index: usize,
    pub source_tokens: Vec<usize>,
    pub source_head: Option<usize>,
    pub source_canonical: String,
    pub source_modifiers: Vec<usize>,
    pub predicate: usize,
    pub predicate_lemma: String,
    pub predicate_particle: Option<String>,
    pub predicate_modifiers: Vec<usize>,
    pub opinion_root: usize,
    pub opinion_tokens: Vec<usize>,
    pub negated: bool,
    pub modal: bool,
    pub complementizer: Option<String>,
    pub complementizer_index: Option<usize>,
}

impl OpinionTuple {
    /// Opinion tokens without the complementizer.
    pub fn opinion_span(&self) -> Vec<usize> {
        self.opinion_tokens
            .iter()
            .copied()
            .filter(|&i| Some(i) != self.complementizer_index)
            .collect()
    }

    pub fn tuple_id(&self) -> String {
        format!("{}:{}:{}", self.article_id, self.sentence_index, self.opinion_root)
    }

    /// Predicate lemma with its particle, e.g. "point out".
    pub fn predicate_phrase(&self) -> String {
        match &self.predicate_particle {
            Some(p) => format!("{} {}", self.predicate_lemma, p),
            None => self.predicate_lemma.clone(),
        }
    }
}

/// A complement that could not be turned into a tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedClause {
    pub article_id: String,
    pub sentence_index: usize,
    pub opinion_root: usize,
    pub reason: String,
}

fn is_participle(s: &ParsedSentence, i: usize) -> bool {
    let t = s.token(i);
    t.has_feature("VerbForm", "Part")
        || t.has_feature("VerbForm", "Ger")
        || matches!(t.xpos.as_str(), "VBG" | "VBN")
}

fn is_nominal(s: &ParsedSentence, i: usize) -> bool {
    matches!(s.token(i).upos.as_str(), "NOUN" | "PROPN" | "PRON")
}

fn is_relative_pronoun(s: &ParsedSentence, i: usize, map: &DeprelMap) -> bool {
    let t = s.token(i);
    t.has_feature("PronType", "Rel")
        || matches!(t.xpos.as_str(), "WP" | "WDT" | "WP$")
        || map.relative_pronouns.contains(&t.lower_form())
}

fn children_with<'a>(
    s: &'a ParsedSentence,
    i: usize,
    set: &'a BTreeSet<String>,
) -> impl Iterator<Item = usize> + 'a {
    s.children(i)
        .iter()
        .copied()
        .filter(move |&c| DeprelMap::is(set, &s.token(c).deprel))
}

fn has_negation_child(s: &ParsedSentence, i: usize, map: &DeprelMap) -> bool {
    s.children(i).iter().any(|&c| {
        let t = s.token(c);
        DeprelMap::is(&map.negation, &t.deprel)
            || (DeprelMap::is(&map.negation_advmod, &t.deprel)
                && (map.negation_lemmas.contains(&t.lower_lemma()) || map.negation_lemmas.contains(&t.lower_form())))
    })
}

/// Source head for a predicate: subject first, then the noun modified by a
/// participial predicate; a relative pronoun is replaced by its antecedent.
fn resolve_source(s: &ParsedSentence, predicate: usize, map: &DeprelMap) -> Option<usize> {
    let pred = s.token(predicate);
    let subject = children_with(s, predicate, &map.subject).next();
    let head = match subject {
        Some(subj) => subj,
        None => {
            if pred.head != 0
                && is_participle(s, predicate)
                && DeprelMap::is(&map.participial, &pred.deprel)
                && is_nominal(s, pred.head)
            {
                return Some(pred.head);
            }
            return None;
        }
    };
    if is_relative_pronoun(s, head, map) && DeprelMap::is(&map.relative_clause, &pred.deprel) && pred.head != 0 {
        return Some(pred.head);
    }
    Some(head)
}

fn without(mut v: Vec<usize>, remove: &BTreeSet<usize>) -> Vec<usize> {
    v.retain(|i| !remove.contains(i));
    v
}

fn extract_one(
    s: &ParsedSentence,
    ccomp_root: usize,
    map: &DeprelMap,
    lexicons: &FilterLexicons,
    config: &ExtractionConfig,
) -> Result<OpinionTuple, String> {
    let predicate = s.head(ccomp_root);
    if predicate == 0 {
        return Err("complement root has no head".into());
    }
    let pred_tok = s.token(predicate);
    let opinion_tokens = subtree(s, ccomp_root);
    let opinion_set: BTreeSet<usize> = opinion_tokens.iter().copied().collect();

    let particle = children_with(s, predicate, &map.particle).next();
    let predicate_particle = particle.map(|p| s.token(p).lower_form());

    let source_head = resolve_source(s, predicate, map);
    let (source_tokens, source_modifiers, source_canonical) = match source_head {
        Some(h) => {
            let mut tokens: Vec<usize> = children_with(s, h, &map.name_parts).flat_map(|c| subtree(s, c)).collect();
            tokens.push(h);
            tokens.sort_unstable();
            let mut excluded: BTreeSet<usize> = tokens.iter().copied().collect();
            if s.is_ancestor(h, predicate) {
                excluded.extend(subtree(s, predicate));
            }
            let modifiers: Vec<usize> = without(subtree(s, h), &excluded)
                .into_iter()
                .filter(|&i| !DeprelMap::is(&map.punctuation, &s.token(i).deprel))
                .collect();
            let canonical = s
                .token(h)
                .coref_canonical
                .clone()
                .unwrap_or_else(|| s.render(&tokens));
            (tokens, modifiers, canonical)
        }
        None => (Vec::new(), Vec::new(), String::new()),
    };

    let mut pred_excluded: BTreeSet<usize> = opinion_set.clone();
    pred_excluded.insert(predicate);
    if let Some(p) = particle {
        pred_excluded.insert(p);
    }
    let mut predicate_modifiers = Vec::new();
    for &c in s.children(predicate) {
        let t = s.token(c);
        if pred_excluded.contains(&c)
            || Some(c) == source_head
            || DeprelMap::is(&map.subject, &t.deprel)
            || DeprelMap::is(&map.ccomp, &t.deprel)
            || DeprelMap::is(&map.punctuation, &t.deprel)
        {
            continue;
        }
        predicate_modifiers.extend(subtree(s, c));
    }
    predicate_modifiers.sort_unstable();

    let complementizer_index = children_with(s, ccomp_root, &map.marker).next();
    let complementizer = complementizer_index.map(|m| s.token(m).lower_form());

    let mut negated = has_negation_child(s, predicate, map);
    if config.negation_on_opinion_root {
        negated |= has_negation_child(s, ccomp_root, map);
    }
    if let Some(h) = source_head {
        negated |= children_with(s, h, &map.determiner)
            .any(|d| map.negating_determiners.contains(&s.token(d).lower_form()));
    }
    let modal = children_with(s, predicate, &map.auxiliary)
        .any(|a| lexicons.modals.contains(&s.token(a).lower_lemma()) || lexicons.modals.contains(&s.token(a).lower_form()));

    Ok(OpinionTuple {
        article_id: s.article_id.clone(),
        sentence_index: s.sentence_index,
        source_tokens,
        source_head,
        source_canonical,
        source_modifiers,
        predicate,
        predicate_lemma: pred_tok.lower_lemma(),
        predicate_particle,
        predicate_modifiers,
        opinion_root: ccomp_root,
        opinion_tokens,
        negated,
        modal,
        complementizer,
        complementizer_index,
    })
}

/// One tuple per clausal complement, in surface order of complement roots.
pub fn extract_tuples(
    sentence: &ParsedSentence,
    map: &DeprelMap,
    lexicons: &FilterLexicons,
    config: &ExtractionConfig,
) -> (Vec<OpinionTuple>, Vec<SkippedClause>) {
    let mut tuples = Vec::new();
    let mut skipped = Vec::new();
    for t in &sentence.tokens {
        if !DeprelMap::is(&map.ccomp, &t.deprel) {
            continue;
        }
        match extract_one(sentence, t.index, map, lexicons, config) {
            Ok(tuple) => tuples.push(tuple),
            Err(reason) => {
                log::warn!(
                    "{}:{} token {}: skipped complement: {reason}",
                    sentence.article_id,
                    sentence.sentence_index,
                    t.index
                );
                skipped.push(SkippedClause {
                    article_id: sentence.article_id.clone(),
                    sentence_index: sentence.sentence_index,
                    opinion_root: t.index,
                    reason,
                })
            }
        }
    }
    (tuples, skipped)
}
