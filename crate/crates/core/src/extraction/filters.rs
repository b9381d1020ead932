use serde::Serialize;

use crate::conllu::ParsedSentence;

use super::{extract_tuples, DeprelMap, ExtractionConfig, ExtractionError, FilterLexicons, OpinionTuple, SkippedClause};

/// Keeps tuples whose predicate (with particle, else bare lemma) is listed.
pub fn filter_indicative(tuples: Vec<OpinionTuple>, lex: &FilterLexicons) -> Result<Vec<OpinionTuple>, ExtractionError> {
    if lex.indicative_verbs.is_empty() {
        return Err(ExtractionError::EmptyIndicativeLexicon);
    }
    Ok(tuples
        .into_iter()
        .filter(|t| lex.indicative_verbs.contains(&t.predicate_phrase()) || lex.indicative_verbs.contains(&t.predicate_lemma))
        .collect())
}

fn governed_by_implicative(t: &OpinionTuple, s: &ParsedSentence, lex: &FilterLexicons) -> bool {
    s.ancestors(t.predicate).any(|a| {
        let tok = s.token(a);
        let (lemma, form) = (tok.lower_lemma(), tok.lower_form());
        lex.implicatives.iter().any(|words| {
            let Some((first, rest)) = words.split_first() else {
                return false;
            };
            if *first != lemma && *first != form {
                return false;
            }
            if rest.is_empty() {
                return true;
            }
            if a >= t.predicate {
                return false;
            }
            let mut want = rest.iter().peekable();
            for i in a + 1..t.predicate {
                if want.peek().is_some_and(|w| **w == s.token(i).lower_form()) {
                    want.next();
                }
            }
            want.peek().is_none()
        })
    })
}

/// Drops tuples whose predicate is governed by an implicitly negating
/// construction such as "fail to".
pub fn filter_implicative_scope(tuples: Vec<OpinionTuple>, sentence: &ParsedSentence, lex: &FilterLexicons) -> Vec<OpinionTuple> {
    tuples.into_iter().filter(|t| !governed_by_implicative(t, sentence, lex)).collect()
}

fn is_indirect_question(t: &OpinionTuple, s: &ParsedSentence, lex: &FilterLexicons) -> bool {
    if t.complementizer.as_ref().is_some_and(|c| lex.question_words.contains(c)) {
        return true;
    }
    t.opinion_span()
        .first()
        .is_some_and(|&i| lex.question_words.contains(&s.token(i).lower_form()))
}

pub fn filter_indirect_questions(tuples: Vec<OpinionTuple>, sentence: &ParsedSentence, lex: &FilterLexicons) -> Vec<OpinionTuple> {
    tuples.into_iter().filter(|t| !is_indirect_question(t, sentence, lex)).collect()
}

fn on_topic(t: &OpinionTuple, s: &ParsedSentence, lex: &FilterLexicons) -> bool {
    t.opinion_tokens.iter().any(|&i| {
        let tok = s.token(i);
        lex.matches_topic(&tok.form) || lex.matches_topic(&tok.lower_lemma())
    })
}

/// Keeps tuples with at least one opinion token starting with a topic stem.
pub fn filter_topic(tuples: Vec<OpinionTuple>, sentence: &ParsedSentence, lex: &FilterLexicons) -> Vec<OpinionTuple> {
    tuples.into_iter().filter(|t| on_topic(t, sentence, lex)).collect()
}

/// Drops negated and/or modal tuples as configured.
pub fn filter_polarity(tuples: Vec<OpinionTuple>, config: &ExtractionConfig) -> Vec<OpinionTuple> {
    tuples
        .into_iter()
        .filter(|t| !(config.drop_negated && t.negated) && !(config.drop_modal && t.modal))
        .collect()
}

const NO_SPACE_BEFORE: [&str; 10] = [".", ",", ";", ":", "!", "?", "%", ")", "n't", "'s"];

/// Whitespace cleanup, first-letter capitalisation and clause-final
/// punctuation.
pub fn render_annotation_text(text: &str) -> String {
    let mut out = String::new();
    for word in text.split_whitespace() {
        let glue = NO_SPACE_BEFORE.iter().any(|p| word.starts_with(p)) || out.ends_with('(');
        if !out.is_empty() && !glue {
            out.push(' ');
        }
        out.push_str(word);
    }
    while out.ends_with([',', ';', ':', '-']) {
        out.pop();
        out.truncate(out.trim_end().len());
    }
    if !out.ends_with(['.', '!', '?']) && !out.is_empty() {
        out.push('.');
    }
    let mut chars = out.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => out,
    }
}

/// Tuples whose opinion contains a precision phrase, paired with their
/// annotation-ready rendering.
pub fn select_annotation_candidates(
    tuples: Vec<OpinionTuple>,
    sentence: &ParsedSentence,
    lex: &FilterLexicons,
) -> Vec<(OpinionTuple, String)> {
    tuples
        .into_iter()
        .filter_map(|t| {
            let text = sentence.render(&t.opinion_span());
            let lower = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
            lex.precision_keywords
                .iter()
                .any(|k| lower.contains(k.as_str()))
                .then(|| (t, render_annotation_text(&text)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    pub extracted: usize,
    pub indicative: usize,
    pub implicative: usize,
    pub indirect_question: usize,
    pub topic: usize,
    pub polarity: usize,
}

impl std::ops::AddAssign for StageCounts {
    fn add_assign(&mut self, o: Self) {
        self.extracted += o.extracted;
        self.indicative += o.indicative;
        self.implicative += o.implicative;
        self.indirect_question += o.indirect_question;
        self.topic += o.topic;
        self.polarity += o.polarity;
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOutcome {
    pub extracted: Vec<OpinionTuple>,
    pub kept: Vec<OpinionTuple>,
    pub skipped: Vec<SkippedClause>,
    /// Tuples surviving after each stage.
    pub counts: StageCounts,
}

/// Extraction followed by the indicative, implicative, indirect-question,
/// topic and polarity filters.
pub fn run_pipeline(
    sentence: &ParsedSentence,
    map: &DeprelMap,
    lex: &FilterLexicons,
    config: &ExtractionConfig,
) -> Result<PipelineOutcome, ExtractionError> {
    let (extracted, skipped) = extract_tuples(sentence, map, lex, config);
    let mut counts = StageCounts {
        extracted: extracted.len(),
        ..Default::default()
    };
    let t = filter_indicative(extracted.clone(), lex)?;
    counts.indicative = t.len();
    let t = filter_implicative_scope(t, sentence, lex);
    counts.implicative = t.len();
    let t = filter_indirect_questions(t, sentence, lex);
    counts.indirect_question = t.len();
    let t = filter_topic(t, sentence, lex);
    counts.topic = t.len();
    let kept = filter_polarity(t, config);
    counts.polarity = kept.len();
    Ok(PipelineOutcome {
        extracted,
        kept,
        skipped,
        counts,
    })
}
