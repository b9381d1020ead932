use std::io::Read;

use super::{LabeledInstance, StanceError};
use crate::corpus::Leaning;
use crate::label::Stance;

/// One sentence of the released stance dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GwsdRow {
    pub guid: String,
    pub sentence: String,
    /// One entry per `worker_*` column, `None` when blank.
    pub worker_labels: Vec<Option<Stance>>,
    /// Aggregated probabilities in [`Stance::index`] order, when present.
    pub distribution: Option<[f64; 3]>,
    pub in_held_out_test: Option<bool>,
    pub leaning: Leaning,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GwsdData {
    pub worker_columns: Vec<String>,
    pub rows: Vec<GwsdRow>,
}

fn parse_vote(raw: &str) -> Result<Option<Stance>, ()> {
    let v = raw.trim().to_ascii_lowercase();
    match v.as_str() {
        "" | "nan" | "na" => Ok(None),
        "agrees" => Ok(Some(Stance::Agree)),
        "disagrees" => Ok(Some(Stance::Disagree)),
        other => other.parse().map(Some).map_err(|_| ()),
    }
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

fn parse_leaning(raw: &str) -> Leaning {
    match raw.trim().to_ascii_lowercase().as_str() {
        "left" | "ll" | "l" => Leaning::Left,
        "right" | "rl" | "r" => Leaning::Right,
        _ => Leaning::Unknown,
    }
}

/// Reads the tab-separated release, locating columns by header name:
/// `sentence` (required), `worker_*`, `disagree`/`neutral`/`agree`, `guid`,
/// `in_held_out_test` and `leaning`.
pub fn read_gwsd<R: Read>(r: R) -> Result<GwsdData, StanceError> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').quoting(false).from_reader(r);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let sentence = find("sentence").ok_or_else(|| StanceError::Invalid("missing `sentence` column".into()))?;
    let workers: Vec<usize> = (0..headers.len()).filter(|&i| headers[i].starts_with("worker_")).collect();
    let probs = match (find("disagree"), find("neutral"), find("agree")) {
        (Some(d), Some(n), Some(a)) => Some([d, n, a]),
        _ => None,
    };
    let guid = find("guid");
    let held_out = find("in_held_out_test");
    let leaning = find("leaning");
    let mut data = GwsdData {
        worker_columns: workers.iter().map(|&i| headers[i].clone()).collect(),
        rows: Vec::new(),
    };
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let mut worker_labels = Vec::with_capacity(workers.len());
        for &w in &workers {
            worker_labels.push(parse_vote(field(w)).map_err(|_| StanceError::UnknownLabel {
                line,
                value: field(w).to_string(),
            })?);
        }
        let distribution = match probs {
            Some(cols) => {
                let mut p = [0.0; 3];
                for (k, &c) in cols.iter().enumerate() {
                    p[k] = field(c).trim().parse().map_err(|_| StanceError::BadRow {
                        line,
                        message: format!("invalid probability {:?}", field(c)),
                    })?;
                }
                let sum: f64 = p.iter().sum();
                if p.iter().any(|v| *v < 0.0) || (sum - 1.0).abs() > 1e-3 {
                    return Err(StanceError::BadRow {
                        line,
                        message: format!("probabilities {p:?} do not sum to 1"),
                    });
                }
                Some(p.map(|v| v / sum))
            }
            None => None,
        };
        data.rows.push(GwsdRow {
            guid: guid.map_or_else(|| format!("row{n}"), |g| field(g).trim().to_string()),
            sentence: field(sentence).to_string(),
            worker_labels,
            distribution,
            in_held_out_test: held_out.and_then(|h| parse_bool(field(h))),
            leaning: leaning.map_or(Leaning::Unknown, |l| parse_leaning(field(l))),
        });
    }
    Ok(data)
}

impl GwsdRow {
    /// Aggregated probabilities, falling back to the share of worker votes.
    pub fn label_distribution(&self) -> Option<[f64; 3]> {
        if let Some(p) = self.distribution {
            return Some(p);
        }
        let mut counts = [0.0; 3];
        for s in self.worker_labels.iter().flatten() {
            counts[s.index()] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        (total > 0.0).then(|| counts.map(|c| c / total))
    }
}

impl GwsdData {
    /// Rows with a usable label distribution, as training instances.
    pub fn instances(&self) -> Vec<LabeledInstance> {
        self.rows
            .iter()
            .filter_map(|r| {
                Some(LabeledInstance {
                    item_id: r.guid.clone(),
                    text: r.sentence.clone(),
                    label_distribution: r.label_distribution()?,
                    leaning: r.leaning,
                })
            })
            .collect()
    }
}
