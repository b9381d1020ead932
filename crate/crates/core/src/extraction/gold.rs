use std::collections::BTreeMap;

use crate::conllu::read_parses;

use super::{run_pipeline, DeprelMap, ExtractionConfig, ExtractionError, FilterLexicons};

/// One hand-annotated clause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldClause {
    pub sent_id: String,
    pub opinion_root: usize,
    pub predicate: usize,
    pub source_head: Option<usize>,
    pub keep: bool,
}

/// Tab-separated: sent_id, opinion_root, predicate, source_head (`-` for
/// none), keep (`yes`/`no`), free-text note.
pub fn parse_gold(text: &str) -> Result<Vec<GoldClause>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 5 {
            return Err(format!("gold line {}: expected at least 5 columns", n + 1));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| format!("gold line {}: bad index {s:?}", n + 1));
        out.push(GoldClause {
            sent_id: cols[0].to_string(),
            opinion_root: num(cols[1])?,
            predicate: num(cols[2])?,
            source_head: if cols[3] == "-" { None } else { Some(num(cols[3])?) },
            keep: match cols[4] {
                "yes" => true,
                "no" => false,
                other => return Err(format!("gold line {}: keep must be yes/no, got {other:?}", n + 1)),
            },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct FixtureReport {
    pub sentences: usize,
    pub gold_clauses: usize,
    pub extracted: usize,
    /// Gold clauses found with matching predicate and source.
    pub matched: usize,
    pub kept: usize,
    /// Kept tuples that are gold-marked keep.
    pub kept_correct: usize,
    pub gold_keep: usize,
    pub problems: Vec<String>,
}

impl FixtureReport {
    pub fn recall(&self) -> f64 {
        if self.gold_clauses == 0 {
            1.0
        } else {
            self.matched as f64 / self.gold_clauses as f64
        }
    }

    pub fn precision(&self) -> f64 {
        if self.kept == 0 {
            1.0
        } else {
            self.kept_correct as f64 / self.kept as f64
        }
    }
}

/// Runs the default pipeline over a fixture corpus and scores it against
/// gold clauses.
pub fn evaluate_fixtures(
    conllu: &str,
    gold: &[GoldClause],
    map: &DeprelMap,
    lex: &FilterLexicons,
    config: &ExtractionConfig,
) -> Result<FixtureReport, ExtractionError> {
    let parsed = read_parses(conllu.as_bytes())?;
    let by_key: BTreeMap<(&str, usize), &GoldClause> =
        gold.iter().map(|g| ((g.sent_id.as_str(), g.opinion_root), g)).collect();
    let mut report = FixtureReport {
        gold_clauses: gold.len(),
        gold_keep: gold.iter().filter(|g| g.keep).count(),
        ..Default::default()
    };
    for s in parsed.documents.iter().flat_map(|d| &d.sentences) {
        report.sentences += 1;
        let out = run_pipeline(s, map, lex, config)?;
        report.extracted += out.extracted.len();
        for t in &out.extracted {
            match by_key.get(&(s.sent_id.as_str(), t.opinion_root)) {
                Some(g) if g.predicate == t.predicate && g.source_head == t.source_head => report.matched += 1,
                Some(g) => report.problems.push(format!(
                    "{} root {}: predicate/source {}/{:?}, gold {}/{:?}",
                    s.sent_id, t.opinion_root, t.predicate, t.source_head, g.predicate, g.source_head
                )),
                None => report.problems.push(format!("{} root {}: not in gold", s.sent_id, t.opinion_root)),
            }
        }
        for t in &out.kept {
            report.kept += 1;
            match by_key.get(&(s.sent_id.as_str(), t.opinion_root)) {
                Some(g) if g.keep => report.kept_correct += 1,
                _ => report.problems.push(format!("{} root {}: kept but gold says drop", s.sent_id, t.opinion_root)),
            }
        }
    }
    for g in gold {
        let found = parsed
            .documents
            .iter()
            .flat_map(|d| &d.sentences)
            .any(|s| s.sent_id == g.sent_id);
        if !found {
            report.problems.push(format!("gold sentence {} missing from corpus", g.sent_id));
        }
    }
    Ok(report)
}
