//! Crowd stance annotations: ingestion, Bayesian aggregation, demographic
//! ordinal regression, human-performance estimation and agreement summaries.

mod agreement;
mod aggregation;
mod human;
mod ordinal;
pub mod synthetic;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::Stance;
use crate::optim::{minimize, LbfgsConfig, Minimum, Objective};

pub use agreement::{
    alpha_units, compare_to_majority, entropy, hardest_items, krippendorff_alpha, majority_vote, AlphaMetric, HardItem,
};
pub use aggregation::{fit_aggregation, AggregationConfig, AggregationFit, AggregationObjective};
pub use human::{estimate_human_performance, HoldoutAccuracy, fit_two_gaussians, HumanPerfConfig, HumanPerformance, TwoGaussians};
pub use ordinal::{
    check_rank, fit_ordinal, median_item_odds_ratios, ordinal_log_probs, CovariateEffect, OrdinalConfig, OrdinalFit,
    OrdinalObjective,
};

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("no annotations")]
    Empty,
    #[error("worker {0:?} has annotations but no profile")]
    MissingProfile(String),
    #[error("covariate matrix [1|X] is rank deficient; collinear columns: {0:?}")]
    RankDeficient(Vec<String>),
    #[error("{0}")]
    Invalid(String),
}

/// One worker's response to one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub item_id: String,
    pub worker_id: String,
    pub response: Stance,
    #[serde(default)]
    pub round: Option<u32>,
}

/// Binary demographic indicators for one worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorProfile {
    pub worker_id: String,
    pub covariates: Vec<f64>,
}

/// Profiles sharing one set of named covariate columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub columns: Vec<String>,
    pub profiles: Vec<AnnotatorProfile>,
}

impl ProfileTable {
    /// Keeps only the named columns, in the given order.
    pub fn select(&self, columns: &[String]) -> Result<ProfileTable, AnnotationError> {
        let idx: Vec<usize> = columns
            .iter()
            .map(|c| {
                self.columns
                    .iter()
                    .position(|x| x == c)
                    .ok_or_else(|| AnnotationError::Invalid(format!("unknown covariate column {c:?}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(ProfileTable {
            columns: columns.to_vec(),
            profiles: self
                .profiles
                .iter()
                .map(|p| AnnotatorProfile {
                    worker_id: p.worker_id.clone(),
                    covariates: idx.iter().map(|&i| p.covariates[i]).collect(),
                })
                .collect(),
        })
    }
}

/// Reads `item_id,worker_id,response[,round]`. Responses may be codes 1..3
/// or label names. Lines starting with `#` are ignored.
pub fn read_annotations<R: Read>(r: R) -> Result<Vec<AnnotationRecord>, AnnotationError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ci), Some(cw), Some(cr)) = (col("item_id"), col("worker_id"), col("response")) else {
        return Err(AnnotationError::Row {
            row: 1,
            message: "header must contain item_id, worker_id, response".into(),
        });
    };
    let cround = col("round");
    let mut out = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = n + 2;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let response: Stance = field(cr).parse().map_err(|e| AnnotationError::Row {
            row,
            message: format!("{e}"),
        })?;
        let round = match cround.map(field) {
            None | Some("") => None,
            Some(v) => Some(v.parse().map_err(|_| AnnotationError::Row {
                row,
                message: format!("invalid round {v:?}"),
            })?),
        };
        let (item_id, worker_id) = (field(ci).to_string(), field(cw).to_string());
        if item_id.is_empty() || worker_id.is_empty() {
            return Err(AnnotationError::Row {
                row,
                message: "empty item_id or worker_id".into(),
            });
        }
        out.push(AnnotationRecord {
            item_id,
            worker_id,
            response,
            round,
        });
    }
    Ok(out)
}

pub fn write_annotations<W: Write>(w: W, records: &[AnnotationRecord]) -> Result<(), AnnotationError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["item_id", "worker_id", "response", "round"])?;
    for r in records {
        let round = r.round.map(|x| x.to_string()).unwrap_or_default();
        wr.write_record([r.item_id.as_str(), r.worker_id.as_str(), &r.response.code().to_string(), &round])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads `worker_id,<covariate>...` with 0/1 (or numeric) cells.
pub fn read_profiles<R: Read>(r: R) -> Result<ProfileTable, AnnotationError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
    let headers = reader.headers()?.clone();
    let Some(cw) = headers.iter().position(|h| h == "worker_id") else {
        return Err(AnnotationError::Row {
            row: 1,
            message: "header must contain worker_id".into(),
        });
    };
    let columns: Vec<String> = headers.iter().enumerate().filter(|(i, _)| *i != cw).map(|(_, h)| h.to_string()).collect();
    let mut profiles = Vec::new();
    let mut seen = BTreeMap::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = n + 2;
        let worker_id = rec.get(cw).unwrap_or("").to_string();
        if seen.insert(worker_id.clone(), row).is_some() {
            return Err(AnnotationError::Row {
                row,
                message: format!("duplicate worker_id {worker_id:?}"),
            });
        }
        let covariates = rec
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != cw)
            .map(|(_, v)| {
                v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| AnnotationError::Row {
                    row,
                    message: format!("non-numeric covariate {v:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        profiles.push(AnnotatorProfile { worker_id, covariates });
    }
    Ok(ProfileTable { columns, profiles })
}

pub fn write_profiles<W: Write>(w: W, table: &ProfileTable) -> Result<(), AnnotationError> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["worker_id".to_string()];
    header.extend(table.columns.iter().cloned());
    wr.write_record(&header)?;
    for p in &table.profiles {
        let mut row = vec![p.worker_id.clone()];
        row.extend(p.covariates.iter().map(|v| format!("{v}")));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Records indexed by sorted item and worker ids.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub items: Vec<String>,
    pub workers: Vec<String>,
    /// (item index, worker index, response)
    pub obs: Vec<(usize, usize, Stance)>,
}

impl Dataset {
    pub fn new(records: &[AnnotationRecord]) -> Result<Self, AnnotationError> {
        if records.is_empty() {
            return Err(AnnotationError::Empty);
        }
        let items: Vec<String> = records.iter().map(|r| r.item_id.clone()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let workers: Vec<String> = records.iter().map(|r| r.worker_id.clone()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let item_ix: BTreeMap<&str, usize> = items.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let worker_ix: BTreeMap<&str, usize> = workers.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let obs = records
            .iter()
            .map(|r| (item_ix[r.item_id.as_str()], worker_ix[r.worker_id.as_str()], r.response))
            .collect();
        Ok(Dataset { items, workers, obs })
    }

    /// Response counts per item, indexed by [`Stance::index`].
    pub fn item_counts(&self) -> Vec<[usize; 3]> {
        let mut c = vec![[0usize; 3]; self.items.len()];
        for &(i, _, y) in &self.obs {
            c[i][y.index()] += 1;
        }
        c
    }
}

/// Per-item response counts keyed by item id.
pub fn counts_by_item(records: &[AnnotationRecord]) -> BTreeMap<String, [usize; 3]> {
    let mut m: BTreeMap<String, [usize; 3]> = BTreeMap::new();
    for r in records {
        m.entry(r.item_id.clone()).or_default()[r.response.index()] += 1;
    }
    m
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax3(v: &[f64; 3]) -> [f64; 3] {
    let l = log_sum_exp(v);
    [(v[0] - l).exp(), (v[1] - l).exp(), (v[2] - l).exp()]
}

/// Inverse-gamma prior on a variance, parameterized by `s = ln sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePrior {
    pub shape: f64,
    pub scale: f64,
}

impl Default for VariancePrior {
    fn default() -> Self {
        VariancePrior { shape: 1.0, scale: 0.5 }
    }
}

impl VariancePrior {
    /// Negative log density of sigma^2 = exp(2s) up to a constant, and its
    /// derivative in `s`.
    pub(crate) fn neg_log(&self, s: f64) -> (f64, f64) {
        let inv = (-2.0 * s).exp();
        (2.0 * (self.shape + 1.0) * s + self.scale * inv, 2.0 * (self.shape + 1.0) - 2.0 * self.scale * inv)
    }

    /// Posterior-mode variance given an expected sum of squares over `n`
    /// draws.
    pub(crate) fn update(&self, expected_ss: f64, n: usize) -> f64 {
        (expected_ss + 2.0 * self.scale) / (n as f64 + 2.0 * (self.shape + 1.0))
    }
}

/// Alternation between the inner MAP fit with variances held fixed and the
/// Laplace-approximate variance update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarianceSchedule {
    pub max_updates: usize,
    /// Stop when both log standard deviations move less than this.
    pub tolerance: f64,
}

impl Default for VarianceSchedule {
    fn default() -> Self {
        VarianceSchedule {
            max_updates: 500,
            tolerance: 1e-6,
        }
    }
}

pub(crate) struct Alternation {
    pub minimum: Minimum,
    pub iterations: usize,
    pub settled: bool,
}

/// Runs the alternation with squared extrapolation of the two log
/// standard deviations. `sq` indexes `ln sigma_q`, followed by
/// `ln sigma_w`; `update` maps a parameter vector to new variances. Inner
/// fits start loose and tighten as the variances settle.
pub(crate) fn alternate<O: Objective>(
    obj: &O,
    x0: Vec<f64>,
    sq: usize,
    optimizer: &LbfgsConfig,
    schedule: &VarianceSchedule,
    update: impl Fn(&[f64]) -> (f64, f64),
) -> Alternation {
    let mut iterations = 0;
    let mut fit = |x: Vec<f64>, tol: f64| {
        let config = LbfgsConfig {
            gradient_tolerance: tol.max(optimizer.gradient_tolerance),
            ..optimizer.clone()
        };
        let m = minimize(obj, x, &config);
        iterations += m.iterations;
        m
    };
    let next = |x: &[f64]| {
        let (vq, vw) = update(x);
        [0.5 * vq.ln(), 0.5 * vw.ln()]
    };
    let at = |x: &[f64], t: [f64; 2]| {
        let mut x = x.to_vec();
        x[sq] = t[0];
        x[sq + 1] = t[1];
        x
    };
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
    let loose = |moved: f64| (1e-2 * moved).min(1e-2);

    let mut m = fit(x0, 1e-2);
    let mut settled = false;
    let mut updates = 0;
    while updates < schedule.max_updates {
        let t0 = [m.x[sq], m.x[sq + 1]];
        let t1 = next(&m.x);
        let d1 = dist(t1, t0);
        m = fit(at(&m.x, t1), loose(d1));
        updates += 1;
        if d1 < schedule.tolerance {
            settled = true;
            break;
        }
        let t2 = next(&m.x);
        let d2 = dist(t2, t1);
        m = fit(at(&m.x, t2), loose(d2));
        updates += 1;
        if d2 < schedule.tolerance {
            settled = true;
            break;
        }
        let r = [t1[0] - t0[0], t1[1] - t0[1]];
        let v = [t2[0] - t1[0] - r[0], t2[1] - t1[1] - r[1]];
        let (nr, nv) = (r[0].hypot(r[1]), v[0].hypot(v[1]));
        if nv > 0.0 {
            let alpha = (-nr / nv).max(-50.0);
            if alpha < -1.0 {
                let t = [0, 1].map(|k| t0[k] - 2.0 * alpha * r[k] + alpha * alpha * v[k]);
                if t.iter().all(|x| x.is_finite()) {
                    m = fit(at(&m.x, t), loose(dist(t, t2)));
                }
            }
        }
    }
    if settled {
        m = fit(m.x, optimizer.gradient_tolerance);
    }
    Alternation {
        minimum: m,
        iterations,
        settled,
    }
}
