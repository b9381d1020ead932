use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::labels::{LabelOrigin, StanceLabel};
use super::tokenize::{features, Preprocessing};
use super::{StanceError, WeightedRow};
use crate::annotation::softmax3;
use crate::label::Stance;
use crate::optim::{minimize, LbfgsConfig, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L2,
    L1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearConfig {
    pub preprocessing: Preprocessing,
    pub penalty: Penalty,
    /// Inverse regularization strength: the loss is summed over rows and the
    /// penalty scaled by `1 / c`.
    pub c: f64,
    pub optimizer: LbfgsConfig,
    /// Iteration cap and step tolerance for the proximal solver used with L1.
    pub l1_max_iterations: usize,
    pub l1_tolerance: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            preprocessing: Preprocessing::default(),
            penalty: Penalty::L2,
            c: 1.0,
            optimizer: LbfgsConfig::default(),
            l1_max_iterations: 20_000,
            l1_tolerance: 1e-9,
        }
    }
}

/// Multinomial logistic regression over unigram and bigram counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Feature string to column; columns follow the sorted feature order.
    pub vocabulary: BTreeMap<String, usize>,
    /// One row per class in [`Stance::index`] order, `|V| + 1` columns with
    /// the bias last.
    pub weights: Vec<Vec<f64>>,
    pub config: LinearConfig,
    pub converged: bool,
}

type SparseDoc = Vec<(usize, f64)>;

fn vectorize(text: &str, vocabulary: &BTreeMap<String, usize>, pre: &Preprocessing) -> SparseDoc {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for f in features(text, pre) {
        if let Some(&j) = vocabulary.get(&f) {
            *counts.entry(j).or_default() += 1.0;
        }
    }
    counts.into_iter().collect()
}

pub(crate) struct LinearObjective {
    docs: Vec<SparseDoc>,
    labels: Vec<usize>,
    weights: Vec<f64>,
    n_features: usize,
    /// Coefficient of the squared norm; zero for the smooth part of L1.
    l2: f64,
}

impl LinearObjective {
    fn stride(&self) -> usize {
        self.n_features + 1
    }

    fn scores(&self, x: &[f64], doc: &SparseDoc) -> [f64; 3] {
        let s = self.stride();
        let mut z = [0.0; 3];
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &x[k * s..(k + 1) * s];
            *zk = row[self.n_features] + doc.iter().map(|&(j, v)| row[j] * v).sum::<f64>();
        }
        z
    }
}

impl Objective for LinearObjective {
    fn dim(&self) -> usize {
        3 * self.stride()
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let s = self.stride();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut f = 0.0;
        for ((doc, &y), &w) in self.docs.iter().zip(&self.labels).zip(&self.weights) {
            let z = self.scores(x, doc);
            let p = softmax3(&z);
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            f += w * (lse - z[y]);
            for k in 0..3 {
                let r = w * (p[k] - if k == y { 1.0 } else { 0.0 });
                let row = &mut grad[k * s..(k + 1) * s];
                row[self.n_features] += r;
                for &(j, v) in doc {
                    row[j] += r * v;
                }
            }
        }
        if self.l2 > 0.0 {
            for k in 0..3 {
                for j in 0..self.n_features {
                    let i = k * s + j;
                    f += 0.5 * self.l2 * x[i] * x[i];
                    grad[i] += self.l2 * x[i];
                }
            }
        }
        f
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Accelerated proximal gradient with backtracking and gradient-based
/// restarts. The bias column is never shrunk.
fn fista(obj: &LinearObjective, lambda: f64, max_iter: usize, tol: f64) -> (Vec<f64>, bool) {
    let n = obj.dim();
    let s = obj.stride();
    let penalized = |i: usize| i % s != obj.n_features;
    let mut x = vec![0.0; n];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut lip = 1.0f64;
    let mut gy = vec![0.0; n];
    let mut gtmp = vec![0.0; n];
    for _ in 0..max_iter {
        let fy = obj.eval(&y, &mut gy);
        let mut next;
        loop {
            next = (0..n)
                .map(|i| {
                    let v = y[i] - gy[i] / lip;
                    if penalized(i) {
                        soft_threshold(v, lambda / lip)
                    } else {
                        v
                    }
                })
                .collect::<Vec<f64>>();
            let fx = obj.eval(&next, &mut gtmp);
            let mut bound = fy;
            for i in 0..n {
                let d = next[i] - y[i];
                bound += gy[i] * d + 0.5 * lip * d * d;
            }
            if fx <= bound + 1e-12 * fy.abs().max(1.0) {
                break;
            }
            lip *= 2.0;
        }
        let step = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let restart = (0..n).map(|i| (y[i] - next[i]) * (next[i] - x[i])).sum::<f64>() > 0.0;
        let t_next = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        let momentum = if restart { 0.0 } else { (t - 1.0) / t_next };
        y = (0..n).map(|i| next[i] + momentum * (next[i] - x[i])).collect();
        x = next;
        t = t_next;
        lip = (lip * 0.9).max(1e-12);
        if step < tol * x.iter().fold(1.0f64, |m, v| m.max(v.abs())) {
            return (x, true);
        }
    }
    (x, false)
}

fn build_objective(rows: &[WeightedRow], config: &LinearConfig) -> (BTreeMap<String, usize>, LinearObjective) {
    let pre = config.preprocessing;
    let feats: Vec<Vec<String>> = rows.par_iter().map(|r| features(&r.text, &pre)).collect();
    let all: BTreeSet<&str> = feats.iter().flatten().map(String::as_str).collect();
    let vocabulary: BTreeMap<String, usize> = all.into_iter().enumerate().map(|(i, f)| (f.to_string(), i)).collect();
    let docs: Vec<SparseDoc> = rows.par_iter().map(|r| vectorize(&r.text, &vocabulary, &pre)).collect();
    let objective = LinearObjective {
        docs,
        labels: rows.iter().map(|r| r.label.index()).collect(),
        weights: rows.iter().map(|r| r.weight).collect(),
        n_features: vocabulary.len(),
        l2: match config.penalty {
            Penalty::L2 => 1.0 / config.c,
            Penalty::L1 => 0.0,
        },
    };
    (vocabulary, objective)
}

/// Fits weighted multinomial cross-entropy plus the configured penalty.
pub fn train_linear(rows: &[WeightedRow], config: &LinearConfig) -> Result<LinearModel, StanceError> {
    let distinct: BTreeSet<Stance> = rows.iter().filter(|r| r.weight > 0.0).map(|r| r.label).collect();
    if distinct.len() < 2 {
        return Err(StanceError::SingleLabel(distinct.len()));
    }
    if rows.iter().any(|r| !r.weight.is_finite() || r.weight < 0.0) {
        return Err(StanceError::Invalid("row weights must be finite and non-negative".into()));
    }
    if !(config.c.is_finite() && config.c > 0.0) {
        return Err(StanceError::Invalid(format!("regularization parameter c = {} must be positive", config.c)));
    }
    let (vocabulary, obj) = build_objective(rows, config);
    let (x, converged) = match config.penalty {
        Penalty::L2 => {
            let m = minimize(&obj, vec![0.0; obj.dim()], &config.optimizer);
            (m.x, m.converged)
        }
        Penalty::L1 => fista(&obj, 1.0 / config.c, config.l1_max_iterations, config.l1_tolerance),
    };
    if !converged {
        log::warn!("stance model optimizer stopped before convergence");
    }
    let s = obj.stride();
    Ok(LinearModel {
        vocabulary,
        weights: x.chunks(s).map(<[f64]>::to_vec).collect(),
        config: config.clone(),
        converged,
    })
}

impl LinearModel {
    /// Class probabilities in [`Stance::index`] order.
    pub fn predict_proba(&self, text: &str) -> [f64; 3] {
        let doc = vectorize(text, &self.vocabulary, &self.config.preprocessing);
        let bias = self.vocabulary.len();
        let mut z = [0.0; 3];
        for (k, zk) in z.iter_mut().enumerate() {
            let row = &self.weights[k];
            *zk = row[bias] + doc.iter().map(|&(j, v)| row[j] * v).sum::<f64>();
        }
        softmax3(&z)
    }

    pub fn predict(&self, text: &str) -> Stance {
        Stance::argmax(&self.predict_proba(text))
    }

    pub fn to_writer<W: Write>(&self, w: W) -> Result<(), StanceError> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self, StanceError> {
        let model: LinearModel = serde_json::from_reader(r)?;
        let width = model.vocabulary.len() + 1;
        if model.weights.len() != 3 || model.weights.iter().any(|row| row.len() != width) {
            return Err(StanceError::Invalid("weight matrix does not match the vocabulary".into()));
        }
        Ok(model)
    }
}

/// Labels `(reference, text)` pairs with the model's argmax class; the
/// winning probability is the confidence.
pub fn classify(model: &LinearModel, items: &[(String, String)]) -> Vec<StanceLabel> {
    items
        .par_iter()
        .map(|(reference, text)| {
            let p = model.predict_proba(text);
            let label = Stance::argmax(&p);
            StanceLabel {
                reference: reference.clone(),
                label,
                confidence: p[label.index()],
                origin: LabelOrigin::InCoreLinear,
            }
        })
        .collect()
}

#[cfg(test)]
pub(crate) fn objective_for(rows: &[WeightedRow], config: &LinearConfig) -> LinearObjective {
    build_objective(rows, config).1
}
