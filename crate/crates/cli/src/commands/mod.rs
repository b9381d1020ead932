//! Subcommand implementations.

mod analysis;
mod annotation;
mod corpus;
mod extract;
mod report;
mod stance;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use opframe::annotation::{read_annotations, AnnotationRecord};
use opframe::corpus::{read_articles, ArticleRecord};
use opframe::extraction::{read_tuples, TupleRecord};
use opframe::stance::read_labels;
use opframe::Stance;

use crate::artifacts::{RunDir, ARTICLES, LABELS, TUPLES};
use crate::config::{module_seed, require, PipelineConfig};
use crate::error::{CliError, CliResult, UserContext};

pub use analysis::{faithfulness, framing, FaithfulnessArgs, FramingArgs};
pub use annotation::{aggregate, demographics, human_perf};
pub use corpus::{corpus, CorpusArgs};
pub use extract::{extract, ExtractArgs};
pub use report::report;
pub use stance::{classify, eval, ingest_labels, train_stance, IngestArgs, TrainArgs};

/// Everything a subcommand needs: the validated config and the run directory.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: PipelineConfig,
    pub run: RunDir,
}

impl Context {
    pub fn seed(&self, module: &str) -> u64 {
        module_seed(self.config.seed, module)
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .user_ctx(format_args!("cannot open {}", path.display()))
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).user_ctx(format_args!("cannot read {}", path.display()))
}

fn load_articles(ctx: &Context) -> CliResult<Vec<ArticleRecord>> {
    let a = ctx.run.load(ARTICLES)?;
    read_articles(a.body.as_bytes()).user_ctx(ARTICLES.file)
}

fn load_tuples(ctx: &Context) -> CliResult<Vec<TupleRecord>> {
    let t = ctx.run.load(TUPLES)?;
    read_tuples(t.body.as_bytes()).user_ctx(TUPLES.file)
}

fn load_labels(ctx: &Context) -> CliResult<BTreeMap<String, Stance>> {
    let l = ctx.run.load(LABELS)?;
    let labels = read_labels(l.body.as_bytes()).user_ctx(LABELS.file)?;
    Ok(labels.into_iter().map(|l| (l.reference, l.label)).collect())
}

fn load_annotations(ctx: &Context) -> CliResult<Vec<AnnotationRecord>> {
    let path = require(&ctx.config.paths.annotations, "annotations")?;
    let records = read_annotations(open(path)?).user_ctx(path.display())?;
    if records.is_empty() {
        return Err(CliError::user(format!("{} holds no annotations", path.display())));
    }
    Ok(records)
}

/// Serializes CSV rows into memory.
fn csv_bytes<T: serde::Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(CliError::internal)?;
    }
    w.into_inner().map_err(CliError::internal)
}

fn stance_counts<'a>(labels: impl IntoIterator<Item = &'a Stance>) -> BTreeMap<&'static str, u64> {
    let mut out: BTreeMap<&'static str, u64> = Stance::ALL.iter().map(|s| (s.as_str(), 0)).collect();
    for s in labels {
        *out.get_mut(s.as_str()).expect("all stances present") += 1;
    }
    out
}
