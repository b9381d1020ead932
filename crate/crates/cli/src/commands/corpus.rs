use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use opframe::corpus::{
    dedup_by_title, dedup_by_url, default_url_tags, filter_by_url, parse_url_tags, read_articles, write_articles,
    Leaning, OutletTable, TitleDedupConfig,
};
use serde::Serialize;
use serde_json::json;

use super::{open, read_text, Context};
use crate::artifacts::{ARTICLES, CORPUS_SUMMARY};
use crate::config::require;
use crate::error::{CliError, CliResult, InternalContext, UserContext};

#[derive(Debug, Clone, Default, Args)]
pub struct CorpusArgs {
    /// Title edit-distance threshold as a fraction of the shorter title.
    #[arg(long)]
    pub dedup_title_threshold: Option<f64>,
    /// URL tag list, one substring per line.
    #[arg(long)]
    pub url_tags: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct CorpusSummary {
    input: usize,
    after_url_filter: usize,
    after_url_dedup: usize,
    after_title_dedup: usize,
    wire: usize,
    per_leaning: BTreeMap<Leaning, usize>,
    per_outlet: BTreeMap<String, usize>,
}

pub fn corpus(ctx: &Context, args: &CorpusArgs) -> CliResult<()> {
    let mut section = ctx.config.corpus.clone();
    if let Some(t) = args.dedup_title_threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::user("--dedup-title-threshold must lie in [0, 1]"));
        }
        section.dedup_title_threshold = t;
    }
    let paths = &ctx.config.paths;
    let source = require(&paths.articles, "articles")?;
    let mut articles = read_articles(open(source)?).user_ctx(source.display())?;
    let outlets = match &paths.outlets {
        Some(p) => OutletTable::load(p).user_ctx(p.display())?,
        None => OutletTable::shipped(),
    };
    outlets.assign(&mut articles);
    let input = articles.len();

    let tag_path = args.url_tags.as_ref().or(paths.url_tags.as_ref());
    let tags = match tag_path {
        Some(p) => parse_url_tags(&read_text(p)?),
        None => default_url_tags(),
    };
    let articles = if section.filter_urls {
        filter_by_url(articles, &tags).user_ctx("URL filter")?
    } else {
        articles
    };
    let after_url_filter = articles.len();
    let articles = dedup_by_url(articles);
    let after_url_dedup = articles.len();
    let articles = dedup_by_title(
        articles,
        &TitleDedupConfig {
            threshold: section.dedup_title_threshold,
            block_by_outlet: section.block_by_outlet,
        },
    );

    let mut per_leaning = BTreeMap::new();
    let mut per_outlet = BTreeMap::new();
    for a in &articles {
        *per_leaning.entry(a.leaning).or_default() += 1;
        *per_outlet.entry(a.outlet.clone()).or_default() += 1;
    }
    let summary = CorpusSummary {
        input,
        after_url_filter,
        after_url_dedup,
        after_title_dedup: articles.len(),
        wire: articles.iter().filter(|a| a.is_wire).count(),
        per_leaning,
        per_outlet,
    };
    log::info!("kept {} of {} articles", summary.after_title_dedup, input);

    let meta = ctx.run.meta(
        "corpus",
        json!({
            "corpus": section,
            "url_tags": match (&args.url_tags, &paths.url_tags) {
                (Some(p), _) => p.display().to_string(),
                (None, Some(_)) => "paths.url_tags".to_string(),
                (None, None) => "shipped".to_string(),
            },
            "url_tag_count": tags.len(),
        }),
    );
    let mut body = Vec::new();
    write_articles(&mut body, &articles).internal_ctx("serialize articles")?;
    ctx.run.write_jsonl(ARTICLES, &meta, &body)?;
    ctx.run.write_json(CORPUS_SUMMARY, &meta, &summary)?;
    Ok(())
}
