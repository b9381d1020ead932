use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::conllu::ParsedSentence;

use super::{ExtractionError, OpinionTuple};

/// A tuple with its surface renderings, as written to JSON lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleRecord {
    pub tuple_id: String,
    #[serde(flatten)]
    pub tuple: OpinionTuple,
    pub source_text: String,
    pub predicate_text: String,
    pub opinion_text: String,
    pub sentence_text: String,
    /// Lower-cased lemmas of the source modifiers, in surface order.
    #[serde(default)]
    pub source_modifier_lemmas: Vec<String>,
    /// Present only for annotation candidates.
    #[serde(default)]
    pub annotation_text: Option<String>,
}

impl TupleRecord {
    pub fn new(tuple: OpinionTuple, sentence: &ParsedSentence, annotation_text: Option<String>) -> Self {
        let mut source: Vec<usize> = tuple.source_tokens.iter().chain(&tuple.source_modifiers).copied().collect();
        source.sort_unstable();
        let mut predicate: Vec<usize> = vec![tuple.predicate];
        predicate.extend(sentence.children(tuple.predicate).iter().copied().filter(|&c| {
            tuple.predicate_particle.is_some() && sentence.token(c).lower_form() == *tuple.predicate_particle.as_ref().unwrap()
        }));
        predicate.sort_unstable();
        TupleRecord {
            tuple_id: tuple.tuple_id(),
            source_text: sentence.render(&source),
            predicate_text: sentence.render(&predicate),
            opinion_text: sentence.render(&tuple.opinion_span()),
            sentence_text: sentence.text(),
            source_modifier_lemmas: tuple.source_modifiers.iter().map(|&i| sentence.token(i).lower_lemma()).collect(),
            annotation_text,
            tuple,
        }
    }
}

pub fn write_tuples<W: Write>(w: &mut W, records: &[TupleRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Reads JSON lines, skipping blank lines and a leading `_meta` line.
pub fn read_tuples<R: BufRead>(r: R) -> Result<Vec<TupleRecord>, ExtractionError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| ExtractionError::Io("tuples".into(), e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("{\"_meta\"") {
            continue;
        }
        out.push(serde_json::from_str(trimmed).map_err(|source| ExtractionError::Json { line: i + 1, source })?);
    }
    Ok(out)
}
