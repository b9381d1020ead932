use std::collections::BTreeMap;
use std::fmt::Write as _;

use opframe::stance::read_labels;
use serde_json::{json, Map, Value};

use super::{stance_counts, Context};
use crate::artifacts::{
    ArtifactKind, AGGREGATION, CORPUS_SUMMARY, DEMOGRAPHICS, EXTRACTION_SUMMARY, FAITHFULNESS, FRAMING,
    HUMAN_PERFORMANCE, LABELS, REPORT_JSON, REPORT_MD, STANCE_EVAL,
};
use crate::error::{CliResult, UserContext};

/// Device rows listed per leaning and slot in the Markdown tables.
const TOP_DEVICES: usize = 10;

fn load_value(ctx: &Context, kind: ArtifactKind, missing: &mut Vec<String>) -> CliResult<Option<Value>> {
    match ctx.run.load_optional(kind)? {
        Some(l) => {
            let mut v: Value = serde_json::from_str(&l.body).user_ctx(kind.file)?;
            if let Some(m) = v.as_object_mut() {
                m.remove("_meta");
            }
            Ok(Some(v))
        }
        None => {
            missing.push(format!("{} (from `{}`)", kind.file, kind.producers.join("` or `")));
            Ok(None)
        }
    }
}

fn pick(v: &Value, keys: &[&str]) -> Value {
    let mut out = Map::new();
    for k in keys {
        if let Some(x) = v.get(*k) {
            out.insert((*k).to_string(), x.clone());
        }
    }
    Value::Object(out)
}

fn num(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => format!("{f:.3}"),
            _ => n.to_string(),
        },
        Value::Null => "n/a".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Significant devices sorted by descending log-odds, grouped by leaning and slot.
fn device_tables(devices: &[Value]) -> BTreeMap<String, Vec<Value>> {
    let mut out: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    for d in devices.iter().filter(|d| d["significant"].as_bool() == Some(true)) {
        let key = format!("{}/{}", d["leaning"].as_str().unwrap_or("?"), d["slot"].as_str().unwrap_or("?"));
        out.entry(key).or_default().push(pick(d, &["device", "category", "polarity", "a", "A", "d", "D", "log_odds", "p_value"]));
    }
    for rows in out.values_mut() {
        rows.sort_by(|x, y| {
            let (a, b) = (x["log_odds"].as_f64().unwrap_or(f64::NAN), y["log_odds"].as_f64().unwrap_or(f64::NAN));
            b.total_cmp(&a).then_with(|| x["device"].as_str().cmp(&y["device"].as_str()))
        });
    }
    out
}

pub fn report(ctx: &Context) -> CliResult<()> {
    let labels_artifact = ctx.run.load(LABELS)?;
    let labels = read_labels(labels_artifact.body.as_bytes()).user_ctx(LABELS.file)?;
    let mut origins: BTreeMap<String, u64> = BTreeMap::new();
    for l in &labels {
        *origins.entry(serde_json::to_value(l.origin).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()).or_default() += 1;
    }

    let mut missing = Vec::new();
    let corpus = load_value(ctx, CORPUS_SUMMARY, &mut missing)?;
    let extraction = load_value(ctx, EXTRACTION_SUMMARY, &mut missing)?;
    let aggregation = load_value(ctx, AGGREGATION, &mut missing)?;
    let demographics = load_value(ctx, DEMOGRAPHICS, &mut missing)?;
    let human = load_value(ctx, HUMAN_PERFORMANCE, &mut missing)?;
    let stance_eval = load_value(ctx, STANCE_EVAL, &mut missing)?;
    let framing = load_value(ctx, FRAMING, &mut missing)?;
    let faithfulness = load_value(ctx, FAITHFULNESS, &mut missing)?;

    let devices = framing
        .as_ref()
        .and_then(|f| f["devices"].as_array().map(|d| device_tables(d)))
        .unwrap_or_default();
    let report = json!({
        "labels": {
            "total": labels.len(),
            "counts": stance_counts(labels.iter().map(|l| &l.label)),
            "origins": origins,
            "producer": labels_artifact.meta.subcommand,
        },
        "corpus": corpus.as_ref().map(|c| pick(c, &["input", "after_title_dedup", "wire", "per_leaning"])),
        "extraction": extraction.as_ref().map(|e| pick(e, &["documents", "sentences", "stages", "kept", "annotation_candidates"])),
        "annotation": aggregation.as_ref().map(|a| pick(a, &["items", "workers", "annotations", "label_counts", "krippendorff_alpha_ordinal", "converged"])),
        "demographics": demographics.as_ref().map(|d| pick(d, &["effects", "converged"])),
        "classifier": stance_eval.as_ref().map(|s| json!({
            "n_test": s["n_test"],
            "accuracy": s["model"]["accuracy"],
            "macro_f1": s["model"]["macro_f1"],
            "majority_label": s["majority"]["label"],
            "majority_accuracy": s["majority"]["evaluation"]["accuracy"],
            "majority_macro_f1": s["majority"]["evaluation"]["macro_f1"],
        })),
        "human_performance": human.as_ref().map(|h| h["high_component_mean"].clone()),
        "coverage": framing.as_ref().map(|f| f["coverage"].clone()),
        "robustness": framing.as_ref().map(|f| f["robustness"].clone()),
        "significant_devices": devices,
        "faithfulness": faithfulness.as_ref().map(|f| pick(f, &["per_leaning", "pooled", "entities"])),
        "hypocrisy": faithfulness.as_ref().map(|f| f["hypocrisy"].clone()),
        "missing": missing,
    });

    let meta = ctx.run.meta("report", json!({}));
    ctx.run.write_json(REPORT_JSON, &meta, &report)?;
    ctx.run.write_text(REPORT_MD, &markdown(&report, &meta.config_sha256, &meta.version))?;
    Ok(())
}

fn markdown(r: &Value, hash: &str, version: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Opinion framing report\n");
    let _ = writeln!(s, "opframe {version}, config `{hash}`\n");

    let _ = writeln!(s, "## Stance labels\n");
    let _ = writeln!(s, "| label | count |\n|---|---|");
    if let Some(m) = r["labels"]["counts"].as_object() {
        for (k, v) in m {
            let _ = writeln!(s, "| {k} | {} |", num(v));
        }
    }
    let _ = writeln!(s, "\nProduced by `{}`.\n", r["labels"]["producer"].as_str().unwrap_or("?"));

    if let Some(c) = r["corpus"].as_object() {
        let _ = writeln!(s, "## Corpus\n");
        let _ = writeln!(s, "{} articles kept of {} read; {} from wire services.\n", num(&c["after_title_dedup"]), num(&c["input"]), num(&c["wire"]));
    }
    if let Some(e) = r["extraction"].as_object() {
        let _ = writeln!(s, "## Extraction\n");
        let _ = writeln!(
            s,
            "{} tuples kept from {} sentences ({} extracted before filtering); {} annotation candidates.\n",
            num(&e["kept"]),
            num(&e["sentences"]),
            num(&e["stages"]["extracted"]),
            num(&e["annotation_candidates"])
        );
    }
    if let Some(a) = r["annotation"].as_object() {
        let _ = writeln!(s, "## Aggregated crowd labels\n");
        let _ = writeln!(s, "| label | items |\n|---|---|");
        if let Some(m) = a["label_counts"].as_object() {
            for (k, v) in m {
                let _ = writeln!(s, "| {k} | {} |", num(v));
            }
        }
        let _ = writeln!(s, "\nKrippendorff's alpha (ordinal): {}\n", num(&a["krippendorff_alpha_ordinal"]));
    }
    if let Some(d) = r["demographics"]["effects"].as_array() {
        let _ = writeln!(s, "## Annotator covariates\n");
        let _ = writeln!(s, "| covariate | beta | odds ratio (agree vs neutral) |\n|---|---|---|");
        for e in d {
            let _ = writeln!(s, "| {} | {} | {} |", num(&e["name"]), num(&e["beta"]), num(&e["odds_ratio_agree_vs_neutral"]));
        }
        let _ = writeln!(s);
    }
    if r["classifier"].is_object() || !r["human_performance"].is_null() {
        let _ = writeln!(s, "## Stance classification\n");
        let _ = writeln!(s, "| system | accuracy | macro F1 |\n|---|---|---|");
        let c = &r["classifier"];
        if c.is_object() {
            let _ = writeln!(s, "| linear | {} | {} |", num(&c["accuracy"]), num(&c["macro_f1"]));
            let _ = writeln!(s, "| majority ({}) | {} | {} |", num(&c["majority_label"]), num(&c["majority_accuracy"]), num(&c["majority_macro_f1"]));
        }
        if !r["human_performance"].is_null() {
            let _ = writeln!(s, "| human (high component) | {} | n/a |", num(&r["human_performance"]));
        }
        let _ = writeln!(s);
    }
    if let Some(cov) = r["coverage"].as_object() {
        let _ = writeln!(s, "## Discourse coverage\n");
        let _ = writeln!(s, "| leaning | self-affirming | opponent-doubting | other framed | residual | n |\n|---|---|---|---|---|---|");
        for (l, c) in cov {
            let _ = writeln!(
                s,
                "| {l} | {} | {} | {} | {} | {} |",
                num(&c["self_affirming"]),
                num(&c["opponent_doubting"]),
                num(&c["other_framed"]),
                num(&c["residual"]),
                num(&c["total"])
            );
        }
        let _ = writeln!(s);
    }
    if let Some(tables) = r["significant_devices"].as_object() {
        if !tables.is_empty() {
            let _ = writeln!(s, "## Significant framing devices\n");
        }
        for (key, rows) in tables {
            let _ = writeln!(s, "### {key}\n");
            let _ = writeln!(s, "| device | category | log-odds | a/A | d/D |\n|---|---|---|---|---|");
            for d in rows.as_array().into_iter().flatten().take(TOP_DEVICES) {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {}/{} | {}/{} |",
                    num(&d["device"]),
                    num(&d["category"]),
                    num(&d["log_odds"]),
                    num(&d["a"]),
                    num(&d["A"]),
                    num(&d["d"]),
                    num(&d["D"])
                );
            }
            let _ = writeln!(s);
        }
    }
    if let Some(f) = r["faithfulness"].as_object() {
        let _ = writeln!(s, "## Unfaithful attribution\n");
        let _ = writeln!(s, "| leaning | matched | unfaithful | rate |\n|---|---|---|---|");
        if let Some(m) = f["per_leaning"].as_object() {
            for (l, v) in m {
                let _ = writeln!(s, "| {l} | {} | {} | {} |", num(&v["matched"]), num(&v["unfaithful"]), num(&v["unfaithful_rate"]));
            }
        }
        let p = &f["pooled"];
        let _ = writeln!(s, "| pooled | {} | {} | {} |\n", num(&p["matched"]), num(&p["unfaithful"]), num(&p["unfaithful_rate"]));
    }
    if let Some(m) = r["missing"].as_array() {
        if !m.is_empty() {
            let _ = writeln!(s, "## Not available\n");
            for x in m {
                let _ = writeln!(s, "- {}", x.as_str().unwrap_or(""));
            }
        }
    }
    s
}
