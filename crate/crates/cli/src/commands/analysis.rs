use std::collections::BTreeMap;

use clap::Args;
use opframe::corpus::{article_leanings, select_articles, ArticleRecord, Leaning};
use opframe::extraction::TupleRecord;
use opframe::faithfulness::{
    faithfulness_report, hypocrisy_predicates, write_attributions_csv, write_hypocrisy_csv, write_review_csv,
    EntityRoster, HypocrisyPredicate, RateSummary,
};
use opframe::framing::{
    coverage_breakdown, device_counts, framing_table, robustness_correlation, write_framing_csv, CoverageCounts,
    FramingLexicon, FramingStat, Slot,
};
use opframe::Stance;
use serde::Serialize;
use serde_json::json;

use super::{load_articles, load_labels, load_tuples, Context};
use crate::artifacts::{ATTRIBUTIONS, FAITHFULNESS, FRAMING, FRAMING_STATS, HYPOCRISY, REVIEW_QUEUE};
use crate::config::FramingSection;
use crate::error::{CliError, CliResult, InternalContext, UserContext};

#[derive(Debug, Clone, Default, Args)]
pub struct FramingArgs {
    /// Minimum agree plus disagree count for a device to be tested.
    #[arg(long)]
    pub min_freq: Option<u64>,
    /// Benjamini-Hochberg false discovery rate.
    #[arg(long)]
    pub fdr: Option<f64>,
    /// Leave out wire-service articles.
    #[arg(long)]
    pub exclude_wire: bool,
    /// Leave out the N outlets with the most articles.
    #[arg(long, value_name = "N")]
    pub exclude_top_outlets: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Coverage {
    counts: CoverageCounts,
    total: u64,
    self_affirming: f64,
    opponent_doubting: f64,
    other_framed: f64,
    residual: f64,
}

impl From<CoverageCounts> for Coverage {
    fn from(counts: CoverageCounts) -> Self {
        let [a, b, c, d] = counts.proportions();
        Coverage {
            counts,
            total: counts.total(),
            self_affirming: a,
            opponent_doubting: b,
            other_framed: c,
            residual: d,
        }
    }
}

#[derive(Debug, Serialize)]
struct Robustness {
    /// Subset compared against the full table.
    variant: String,
    slot: String,
    r: Option<f64>,
    p_value: Option<f64>,
    n: Option<usize>,
    note: Option<String>,
}

#[derive(Debug, Serialize)]
struct Selection {
    articles: usize,
    tuples: usize,
    labelled_tuples: usize,
}

#[derive(Debug, Serialize)]
struct FramingFile {
    selection: Selection,
    coverage: BTreeMap<Leaning, Coverage>,
    devices: Vec<FramingStat>,
    robustness: Vec<Robustness>,
    config: FramingSection,
}

fn table(
    articles: &[ArticleRecord],
    tuples: &[TupleRecord],
    labels: &BTreeMap<String, Stance>,
    lexicon: &FramingLexicon,
    section: &FramingSection,
) -> Vec<FramingStat> {
    let leanings = article_leanings(articles);
    framing_table(&device_counts(tuples, labels, &leanings, lexicon), lexicon, &section.stats)
}

pub fn framing(ctx: &Context, args: &FramingArgs) -> CliResult<()> {
    let mut section = ctx.config.framing.clone();
    if let Some(m) = args.min_freq {
        section.stats.min_freq = m;
    }
    if let Some(q) = args.fdr {
        if !(q > 0.0 && q <= 1.0) {
            return Err(CliError::user("--fdr must lie in (0, 1]"));
        }
        section.stats.fdr = q;
    }
    section.exclude_wire |= args.exclude_wire;
    if let Some(n) = args.exclude_top_outlets {
        section.exclude_top_outlets = n;
    }
    let lexicon = match &ctx.config.paths.framing_lexicon {
        Some(p) => FramingLexicon::load(p).user_ctx(p.display())?,
        None => FramingLexicon::shipped(),
    };
    let articles = load_articles(ctx)?;
    let tuples = load_tuples(ctx)?;
    let labels = load_labels(ctx)?;

    let selected = select_articles(&articles, section.exclude_wire, section.exclude_top_outlets);
    let leanings = article_leanings(&selected);
    let devices = table(&selected, &tuples, &labels, &lexicon, &section);
    let coverage = coverage_breakdown(&tuples, &labels, &leanings, &lexicon)
        .per_leaning
        .into_iter()
        .map(|(l, c)| (l, Coverage::from(c)))
        .collect();

    let variants = [
        ("no_wire".to_string(), select_articles(&selected, true, 0)),
        (
            format!("no_top_{}_outlets", section.robustness_top_outlets),
            select_articles(&selected, false, section.robustness_top_outlets),
        ),
    ];
    let mut robustness = Vec::new();
    for (variant, subset) in &variants {
        let sub = table(subset, &tuples, &labels, &lexicon, &section);
        for (slot_name, slot) in [("all", None), ("predicate", Some(Slot::Predicate)), ("source_modifier", Some(Slot::SourceModifier))] {
            let row = match robustness_correlation(&devices, &sub, slot) {
                Ok(c) => Robustness {
                    variant: variant.clone(),
                    slot: slot_name.into(),
                    r: Some(c.r),
                    p_value: Some(c.p_value),
                    n: Some(c.n),
                    note: None,
                },
                Err(e) => Robustness {
                    variant: variant.clone(),
                    slot: slot_name.into(),
                    r: None,
                    p_value: None,
                    n: None,
                    note: Some(e.to_string()),
                },
            };
            robustness.push(row);
        }
    }

    let in_selection = |t: &&TupleRecord| leanings.contains_key(&t.tuple.article_id);
    let file = FramingFile {
        selection: Selection {
            articles: selected.len(),
            tuples: tuples.iter().filter(in_selection).count(),
            labelled_tuples: tuples.iter().filter(in_selection).filter(|t| labels.contains_key(&t.tuple_id)).count(),
        },
        coverage,
        devices,
        robustness,
        config: section.clone(),
    };
    let significant = file.devices.iter().filter(|s| s.significant).count();
    log::info!("{} device rows, {significant} significant at FDR {}", file.devices.len(), section.stats.fdr);

    let meta = ctx.run.meta("framing", json!({ "framing": section }));
    let mut body = Vec::new();
    write_framing_csv(&mut body, &file.devices).internal_ctx("serialize framing table")?;
    ctx.run.write_csv(FRAMING_STATS, &meta, &body)?;
    ctx.run.write_json(FRAMING, &meta, &file)?;
    Ok(())
}

#[derive(Debug, Clone, Default, Args)]
pub struct FaithfulnessArgs {
    /// Minimum token-set score (0 to 100) for a roster match.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Serialize)]
struct FaithfulnessFile {
    per_leaning: BTreeMap<Leaning, RateSummary>,
    pooled: RateSummary,
    entities: BTreeMap<String, u64>,
    review_candidates: usize,
    hypocrisy: BTreeMap<Leaning, Vec<HypocrisyPredicate>>,
    roster_entries: usize,
}

pub fn faithfulness(ctx: &Context, args: &FaithfulnessArgs) -> CliResult<()> {
    let mut section = ctx.config.faithfulness.clone();
    if let Some(t) = args.threshold {
        if !(0.0..=100.0).contains(&t) {
            return Err(CliError::user("--threshold must lie in [0, 100]"));
        }
        section.matching.threshold = t;
    }
    if section.matching.review_floor > section.matching.threshold {
        log::warn!("review floor exceeds the match threshold; the review queue will be empty");
    }
    let roster = match &ctx.config.paths.roster {
        Some(p) => EntityRoster::load(p).user_ctx(p.display())?,
        None => EntityRoster::shipped(),
    };
    if roster.is_empty() {
        log::warn!("entity roster is empty; no attributions can be matched");
    }
    let articles = load_articles(ctx)?;
    let tuples = load_tuples(ctx)?;
    let labels = load_labels(ctx)?;
    let leanings = article_leanings(&articles);
    let report = faithfulness_report(&tuples, &labels, &leanings, &roster, &section.matching);
    let lists = hypocrisy_predicates(&report.records, &section.hypocrisy);
    let mut entities = BTreeMap::new();
    for r in &report.records {
        *entities.entry(r.canonical_entity.clone()).or_default() += 1;
    }
    log::info!(
        "{} matched attributions, unfaithful rate {:.3}",
        report.pooled.matched,
        report.pooled.unfaithful_rate
    );
    let file = FaithfulnessFile {
        per_leaning: report.per_leaning.clone(),
        pooled: report.pooled,
        entities,
        review_candidates: report.review.len(),
        hypocrisy: lists.clone(),
        roster_entries: roster.entries.len(),
    };

    let meta = ctx.run.meta("faithfulness", json!({ "faithfulness": section }));
    let mut body = Vec::new();
    write_attributions_csv(&mut body, &report.records).internal_ctx("serialize attributions")?;
    ctx.run.write_csv(ATTRIBUTIONS, &meta, &body)?;
    let mut body = Vec::new();
    write_review_csv(&mut body, &report.review).internal_ctx("serialize review queue")?;
    ctx.run.write_csv(REVIEW_QUEUE, &meta, &body)?;
    let mut body = Vec::new();
    write_hypocrisy_csv(&mut body, &lists).internal_ctx("serialize hypocrisy predicates")?;
    ctx.run.write_csv(HYPOCRISY, &meta, &body)?;
    ctx.run.write_json(FAITHFULNESS, &meta, &file)?;
    Ok(())
}
