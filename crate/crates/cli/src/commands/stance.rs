use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use clap::Args;
use opframe::extraction::render_annotation_text;
use opframe::stance::{
    classify as classify_texts, cross_validate, evaluate, expand_weighted, ingest_external_labels, majority_baseline,
    read_gwsd, stratified_split, train_linear, write_labels, CrossValidation, Evaluation, LabeledInstance, LinearConfig,
    LinearModel,
};
use opframe::Stance;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{csv_bytes, load_tuples, open, stance_counts, Context};
use crate::artifacts::{INGEST_REJECTED, LABELS, STANCE_EVAL, STANCE_MODEL, STANCE_SPLIT};
use crate::config::require;
use crate::error::{CliError, CliResult, InternalContext, UserContext};

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// Cross-validation folds over the training portion; 0 skips it.
    #[arg(long)]
    pub cv_folds: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct IngestArgs {
    /// CSV of `reference,label,confidence` rows; defaults to paths.external_labels.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

/// Instances from the stance dataset plus, when the file marks one, its
/// fixed held-out set.
fn load_instances(ctx: &Context) -> CliResult<(Vec<LabeledInstance>, Option<BTreeSet<String>>)> {
    let path = require(&ctx.config.paths.stance_data, "stance_data")?;
    let data = read_gwsd(open(path)?).user_ctx(path.display())?;
    let instances = data.instances();
    if instances.len() < data.rows.len() {
        log::warn!("{} rows have no usable label and are skipped", data.rows.len() - instances.len());
    }
    let mut seen = BTreeSet::new();
    for inst in &instances {
        inst.validate().user_ctx(path.display())?;
        if !seen.insert(inst.item_id.as_str()) {
            return Err(CliError::user(format!("{}: duplicate item id {:?}", path.display(), inst.item_id)));
        }
    }
    let held_out = data
        .rows
        .iter()
        .any(|r| r.in_held_out_test.is_some())
        .then(|| data.rows.iter().filter(|r| r.in_held_out_test == Some(true)).map(|r| r.guid.clone()).collect());
    Ok((instances, held_out))
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitFile {
    /// `held_out_column` or `stratified`.
    source: String,
    train: Vec<String>,
    test: Vec<String>,
    vocabulary: usize,
    converged: bool,
    cross_validation: Option<CrossValidation>,
}

pub fn train_stance(ctx: &Context, args: &TrainArgs) -> CliResult<()> {
    let section = &ctx.config.stance;
    let cv_folds = args.cv_folds.unwrap_or(section.cv_folds);
    let (instances, held_out) = load_instances(ctx)?;
    let (source, train, test): (&str, Vec<&LabeledInstance>, Vec<&LabeledInstance>) = match &held_out {
        Some(ids) => {
            let (test, train) = instances.iter().partition(|i| ids.contains(&i.item_id));
            ("held_out_column", train, test)
        }
        None => {
            let split = stratified_split(&instances, section.test_size, ctx.seed("stance-split")).user_ctx("split")?;
            (
                "stratified",
                split.train.iter().map(|&i| &instances[i]).collect(),
                split.test.iter().map(|&i| &instances[i]).collect(),
            )
        }
    };
    let train_owned: Vec<LabeledInstance> = train.iter().map(|&i| i.clone()).collect();
    let model = train_linear(&expand_weighted(&train_owned), &section.model).user_ctx("training")?;
    if !model.converged {
        log::warn!("stance model optimizer did not converge");
    }
    let cross_validation = if cv_folds >= 2 {
        Some(cross_validate(&train_owned, &section.model, cv_folds, ctx.seed("stance-cv")).user_ctx("cross-validation")?)
    } else {
        None
    };
    log::info!("trained on {} items, {} held out, vocabulary {}", train.len(), test.len(), model.vocabulary.len());
    let split = SplitFile {
        source: source.into(),
        train: train.iter().map(|i| i.item_id.clone()).collect(),
        test: test.iter().map(|i| i.item_id.clone()).collect(),
        vocabulary: model.vocabulary.len(),
        converged: model.converged,
        cross_validation,
    };
    let meta = ctx.run.meta(
        "train-stance",
        json!({ "model": section.model, "test_size": section.test_size, "cv_folds": cv_folds }),
    );
    ctx.run.write_json(STANCE_MODEL, &meta, &model)?;
    ctx.run.write_json(STANCE_SPLIT, &meta, &split)?;
    Ok(())
}

fn load_model(ctx: &Context) -> CliResult<LinearModel> {
    let m = ctx.run.load(STANCE_MODEL)?;
    LinearModel::from_reader(m.body.as_bytes()).user_ctx(STANCE_MODEL.file)
}

#[derive(Debug, Serialize)]
struct Baseline {
    label: Stance,
    evaluation: Evaluation,
}

#[derive(Debug, Serialize)]
struct EvalFile {
    split_source: String,
    n_train: usize,
    n_test: usize,
    model: Evaluation,
    majority: Baseline,
    config: LinearConfig,
}

fn print_evaluation(name: &str, e: &Evaluation) {
    let f1: Vec<String> = Stance::ALL
        .iter()
        .map(|s| format!("{}={:.3}", s.as_str(), e.per_class[s.index()].f1))
        .collect();
    println!("{name:<9} accuracy={:.3} macro_f1={:.3} {}", e.accuracy, e.macro_f1, f1.join(" "));
}

pub fn eval(ctx: &Context) -> CliResult<()> {
    let model = load_model(ctx)?;
    let split_file = ctx.run.load(STANCE_SPLIT)?;
    let split: SplitFile = serde_json::from_str(&split_file.body).user_ctx(STANCE_SPLIT.file)?;
    let (instances, _) = load_instances(ctx)?;
    let by_id: BTreeMap<&str, &LabeledInstance> = instances.iter().map(|i| (i.item_id.as_str(), i)).collect();
    let lookup = |ids: &[String]| -> CliResult<Vec<&LabeledInstance>> {
        ids.iter()
            .map(|id| {
                by_id.get(id.as_str()).copied().ok_or_else(|| {
                    CliError::user(format!("item {id:?} from {} is not in the stance data", STANCE_SPLIT.file))
                })
            })
            .collect()
    };
    let train = lookup(&split.train)?;
    let test = lookup(&split.test)?;
    if test.is_empty() {
        return Err(CliError::user("the held-out set is empty"));
    }
    let gold: Vec<Stance> = test.iter().map(|i| i.label()).collect();
    let predicted: Vec<Stance> = test.iter().map(|i| model.predict(&i.text)).collect();
    let majority = majority_baseline(&train.iter().map(|i| i.label()).collect::<Vec<_>>());
    let result = EvalFile {
        split_source: split.source.clone(),
        n_train: train.len(),
        n_test: test.len(),
        model: evaluate(&gold, &predicted),
        majority: Baseline {
            label: majority,
            evaluation: evaluate(&gold, &vec![majority; gold.len()]),
        },
        config: model.config.clone(),
    };
    print_evaluation("linear", &result.model);
    print_evaluation("majority", &result.majority.evaluation);
    let meta = ctx.run.meta("eval", json!({}));
    ctx.run.write_json(STANCE_EVAL, &meta, &result)?;
    Ok(())
}

pub fn classify(ctx: &Context) -> CliResult<()> {
    let model = load_model(ctx)?;
    let tuples = load_tuples(ctx)?;
    let items: Vec<(String, String)> = tuples
        .iter()
        .map(|t| {
            let text = t.annotation_text.clone().unwrap_or_else(|| render_annotation_text(&t.opinion_text));
            (t.tuple_id.clone(), text)
        })
        .collect();
    let labels = classify_texts(&model, &items);
    let counts = stance_counts(labels.iter().map(|l| &l.label));
    log::info!("labelled {} tuples: {counts:?}", labels.len());
    let mut body = Vec::new();
    write_labels(&mut body, &labels).internal_ctx("serialize labels")?;
    let meta = ctx.run.meta("classify", json!({}));
    ctx.run.write_csv(LABELS, &meta, &body)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct RejectedLine<'a> {
    line: u64,
    reference: &'a str,
    reason: &'a str,
}

pub fn ingest_labels(ctx: &Context, args: &IngestArgs) -> CliResult<()> {
    let path = match &args.labels {
        Some(p) => p.as_path(),
        None => require(&ctx.config.paths.external_labels, "external_labels")?,
    };
    let tuples = load_tuples(ctx)?;
    let known: BTreeSet<String> = tuples.into_iter().map(|t| t.tuple_id).collect();
    let outcome = ingest_external_labels(open(path)?, &known).user_ctx(path.display())?;
    for r in &outcome.rejected {
        log::warn!("line {}: {} ({})", r.line, r.reason, r.reference);
    }
    if !outcome.duplicates.is_empty() {
        log::warn!("{} references labelled more than once; the last label wins", outcome.duplicates.len());
    }
    let known_labelled = outcome.labels.len();
    log::info!("ingested {known_labelled} labels covering {} of {} tuples", known_labelled, known.len());
    let mut body = Vec::new();
    write_labels(&mut body, &outcome.labels).internal_ctx("serialize labels")?;
    let rejected: Vec<RejectedLine> = outcome
        .rejected
        .iter()
        .map(|r| RejectedLine {
            line: r.line,
            reference: &r.reference,
            reason: &r.reason,
        })
        .collect();
    let meta = ctx.run.meta(
        "ingest-labels",
        json!({
            "source": match &args.labels {
                Some(p) => p.display().to_string(),
                None => "paths.external_labels".to_string(),
            },
            "duplicates": outcome.duplicates.len(),
        }),
    );
    ctx.run.write_csv(LABELS, &meta, &body)?;
    ctx.run.write_csv(INGEST_REJECTED, &meta, &csv_bytes(&rejected)?)?;
    Ok(())
}
