use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use opframe::conllu::{read_parses, ParsedDocument};
use opframe::extraction::{
    run_pipeline, select_annotation_candidates, write_tuples, DeprelMap, ExtractionConfig, FilterLexicons,
    StageCounts, TupleRecord,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{open, Context};
use crate::artifacts::{EXTRACTION_SUMMARY, TUPLES};
use crate::config::require;
use crate::error::{CliError, CliResult, InternalContext, UserContext};

#[derive(Debug, Clone, Default, Args)]
pub struct ExtractArgs {
    /// Directory of filter word lists; missing files fall back to the shipped lists.
    #[arg(long)]
    pub lexicon_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ExtractionSummary {
    documents: usize,
    sentences: usize,
    rejected_sentences: Vec<String>,
    stages: StageCounts,
    kept: usize,
    annotation_candidates: usize,
    skipped_clauses: BTreeMap<String, usize>,
}

#[derive(Default)]
struct DocumentOutput {
    records: Vec<TupleRecord>,
    stages: StageCounts,
    skipped: Vec<String>,
}

fn extract_document(
    doc: &ParsedDocument,
    map: &DeprelMap,
    lex: &FilterLexicons,
    config: &ExtractionConfig,
) -> CliResult<DocumentOutput> {
    let mut out = DocumentOutput::default();
    for sentence in &doc.sentences {
        let outcome = run_pipeline(sentence, map, lex, config).map_err(CliError::user)?;
        out.stages += outcome.counts;
        out.skipped.extend(outcome.skipped.into_iter().map(|s| s.reason));
        let mut candidates: BTreeMap<String, String> = select_annotation_candidates(outcome.kept.clone(), sentence, lex)
            .into_iter()
            .map(|(t, text)| (t.tuple_id(), text))
            .collect();
        for t in outcome.kept {
            let text = candidates.remove(&t.tuple_id());
            out.records.push(TupleRecord::new(t, sentence, text));
        }
    }
    Ok(out)
}

pub fn extract(ctx: &Context, args: &ExtractArgs) -> CliResult<()> {
    let paths = &ctx.config.paths;
    let source = require(&paths.parses, "parses")?;
    let lexicon_dir = args.lexicon_dir.as_ref().or(paths.lexicon_dir.as_ref());
    let lex = match lexicon_dir {
        Some(d) => FilterLexicons::load_dir(d).user_ctx(d.display())?,
        None => FilterLexicons::shipped(),
    };
    let map = match &paths.deprels {
        Some(p) => DeprelMap::load(p).user_ctx(p.display())?,
        None => DeprelMap::default(),
    };
    let parsed = read_parses(open(source)?).user_ctx(source.display())?;
    for d in &parsed.rejected {
        log::warn!("rejected sentence: {d}");
    }
    let config = &ctx.config.extraction;
    let outputs: Vec<DocumentOutput> = parsed
        .documents
        .par_iter()
        .map(|doc| extract_document(doc, &map, &lex, config))
        .collect::<CliResult<_>>()?;

    let mut records = Vec::new();
    let mut stages = StageCounts::default();
    let mut skipped_clauses: BTreeMap<String, usize> = BTreeMap::new();
    for o in outputs {
        records.extend(o.records);
        stages += o.stages;
        for reason in o.skipped {
            *skipped_clauses.entry(reason).or_default() += 1;
        }
    }
    let summary = ExtractionSummary {
        documents: parsed.documents.len(),
        sentences: parsed.documents.iter().map(|d| d.sentences.len()).sum(),
        rejected_sentences: parsed.rejected.iter().map(|d| d.to_string()).collect(),
        stages,
        kept: records.len(),
        annotation_candidates: records.iter().filter(|r| r.annotation_text.is_some()).count(),
        skipped_clauses,
    };
    log::info!("kept {} of {} extracted tuples", summary.kept, stages.extracted);

    let meta = ctx.run.meta(
        "extract",
        json!({
            "extraction": config,
            "lexicon_dir": match (&args.lexicon_dir, &paths.lexicon_dir) {
                (Some(p), _) => p.display().to_string(),
                (None, Some(_)) => "paths.lexicon_dir".to_string(),
                (None, None) => "shipped".to_string(),
            },
        }),
    );
    let mut body = Vec::new();
    write_tuples(&mut body, &records).internal_ctx("serialize tuples")?;
    ctx.run.write_jsonl(TUPLES, &meta, &body)?;
    ctx.run.write_json(EXTRACTION_SUMMARY, &meta, &summary)?;
    Ok(())
}
