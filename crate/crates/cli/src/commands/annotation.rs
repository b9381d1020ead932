use std::collections::BTreeMap;

use opframe::annotation::{
    alpha_units, compare_to_majority, estimate_human_performance, fit_aggregation, fit_ordinal, hardest_items,
    krippendorff_alpha, read_profiles, AggregationConfig, AlphaMetric, CovariateEffect, HardItem, OrdinalConfig,
};
use opframe::Stance;
use serde::Serialize;
use serde_json::json;

use super::{csv_bytes, load_annotations, open, stance_counts, Context};
use crate::artifacts::{AGGREGATED_LABELS, AGGREGATION, DEMOGRAPHICS, HUMAN_PERFORMANCE};
use crate::config::require;
use crate::error::{CliResult, UserContext};

#[derive(Debug, Serialize)]
struct WorkerSummary {
    worker_id: String,
    vigilance: f64,
    bias: [f64; 3],
}

#[derive(Debug, Serialize)]
struct AggregationSummary {
    items: usize,
    workers: usize,
    annotations: usize,
    label_counts: BTreeMap<&'static str, u64>,
    mu: [f64; 3],
    sigma_q2: f64,
    sigma_w2: f64,
    objective: f64,
    gradient_norm: f64,
    iterations: usize,
    converged: bool,
    /// Rows: per-item majority vote; columns: model label; disagree, neutral, agree.
    confusion_vs_majority: [[usize; 3]; 3],
    krippendorff_alpha_ordinal: Option<f64>,
    hardest_items: Vec<HardItem>,
    worker_parameters: Vec<WorkerSummary>,
    config: AggregationConfig,
}

#[derive(Debug, Serialize)]
struct ItemLabel<'a> {
    item_id: &'a str,
    label: Stance,
    disagree: f64,
    neutral: f64,
    agree: f64,
}

pub fn aggregate(ctx: &Context) -> CliResult<()> {
    let records = load_annotations(ctx)?;
    let mut config = ctx.config.aggregation.clone();
    config.seed = ctx.seed("aggregate");
    let fit = fit_aggregation(&records, &config).user_ctx("aggregation")?;
    if !fit.converged {
        log::warn!("aggregation stopped after {} iterations without converging", fit.iterations);
    }
    let labels: Vec<Stance> = (0..fit.items.len()).map(|i| fit.label(i)).collect();
    let summary = AggregationSummary {
        items: fit.items.len(),
        workers: fit.workers.len(),
        annotations: records.len(),
        label_counts: stance_counts(&labels),
        mu: fit.mu,
        sigma_q2: fit.sigma_q2,
        sigma_w2: fit.sigma_w2,
        objective: fit.objective,
        gradient_norm: fit.gradient_norm,
        iterations: fit.iterations,
        converged: fit.converged,
        confusion_vs_majority: compare_to_majority(&fit, &records),
        krippendorff_alpha_ordinal: krippendorff_alpha(&alpha_units(&records), AlphaMetric::Ordinal),
        hardest_items: hardest_items(&records, 10),
        worker_parameters: fit
            .workers
            .iter()
            .enumerate()
            .map(|(j, w)| WorkerSummary {
                worker_id: w.clone(),
                vigilance: fit.vigilance[j],
                bias: fit.w[j],
            })
            .collect(),
        config: fit.config.clone(),
    };
    let rows: Vec<ItemLabel> = fit
        .items
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let p = fit.distribution(i);
            ItemLabel {
                item_id: id,
                label: labels[i],
                disagree: p[0],
                neutral: p[1],
                agree: p[2],
            }
        })
        .collect();
    let meta = ctx.run.meta("aggregate", json!({ "aggregation": config }));
    ctx.run.write_json(AGGREGATION, &meta, &summary)?;
    ctx.run.write_csv(AGGREGATED_LABELS, &meta, &csv_bytes(&rows)?)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct DemographicsSummary {
    items: usize,
    workers: usize,
    columns: Vec<String>,
    effects: Vec<CovariateEffect>,
    cutpoints: [f64; 2],
    sigma_q2: f64,
    sigma_w2: f64,
    median_eta: f64,
    objective: f64,
    gradient_norm: f64,
    iterations: usize,
    converged: bool,
    config: OrdinalConfig,
}

pub fn demographics(ctx: &Context) -> CliResult<()> {
    let records = load_annotations(ctx)?;
    let path = require(&ctx.config.paths.profiles, "profiles")?;
    let mut profiles = read_profiles(open(path)?).user_ctx(path.display())?;
    let section = &ctx.config.demographics;
    if !section.columns.is_empty() {
        profiles = profiles.select(&section.columns).user_ctx("demographics.columns")?;
    }
    let mut config = section.model.clone();
    config.seed = ctx.seed("demographics");
    let fit = fit_ordinal(&records, &profiles, &config).user_ctx("ordinal model")?;
    if !fit.converged {
        log::warn!("ordinal model stopped after {} iterations without converging", fit.iterations);
    }
    let summary = DemographicsSummary {
        items: fit.items.len(),
        workers: fit.workers.len(),
        columns: fit.columns.clone(),
        effects: fit.effects.clone(),
        cutpoints: [fit.c1, fit.c2],
        sigma_q2: fit.sigma_q2,
        sigma_w2: fit.sigma_w2,
        median_eta: fit.median_eta,
        objective: fit.objective,
        gradient_norm: fit.gradient_norm,
        iterations: fit.iterations,
        converged: fit.converged,
        config: fit.config.clone(),
    };
    let meta = ctx.run.meta(
        "demographics",
        json!({ "columns": section.columns, "ordinal": config }),
    );
    ctx.run.write_json(DEMOGRAPHICS, &meta, &summary)?;
    Ok(())
}

pub fn human_perf(ctx: &Context) -> CliResult<()> {
    let records = load_annotations(ctx)?;
    let mut config = ctx.config.human_perf.clone();
    config.seed = ctx.seed("human-perf");
    let perf = estimate_human_performance(&records, &config).user_ctx("human performance")?;
    log::info!("high-component mean accuracy {:.3}", perf.high_component_mean);
    let meta = ctx.run.meta("human-perf", json!({ "human_perf": config }));
    ctx.run.write_json(HUMAN_PERFORMANCE, &meta, &perf)?;
    Ok(())
}
