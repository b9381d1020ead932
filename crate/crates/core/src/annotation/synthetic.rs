//! Simulated annotation data drawn from the aggregation and ordinal
//! generative models, for calibration and recovery checks.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::label::Stance;

use super::ordinal::{median_item_odds_ratios, ordinal_log_probs};
use super::{softmax3, AnnotationRecord, AnnotatorProfile, ProfileTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationScenario {
    pub n_items: usize,
    pub n_workers: usize,
    pub per_item: usize,
    /// Label proportions whose logs are the prior means of item scores.
    pub proportions: [f64; 3],
    pub sigma_q: f64,
    pub sigma_w: f64,
    /// Vigilance ~ Beta(a, b) for ordinary workers.
    pub vigilance_beta: (f64, f64),
    /// Share of workers with vigilance exactly 0.
    pub spammer_fraction: f64,
}

impl Default for AggregationScenario {
    fn default() -> Self {
        AggregationScenario {
            n_items: 500,
            n_workers: 50,
            per_item: 8,
            proportions: [0.2, 0.42, 0.38],
            sigma_q: 6.0,
            sigma_w: 2.0,
            vigilance_beta: (2.0, 1.0),
            spammer_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticAggregation {
    pub records: Vec<AnnotationRecord>,
    pub item_ids: Vec<String>,
    pub worker_ids: Vec<String>,
    pub q: Vec<[f64; 3]>,
    pub w: Vec<[f64; 3]>,
    pub vigilance: Vec<f64>,
    /// Argmax of each item's generating scores.
    pub true_labels: Vec<Stance>,
}

impl SyntheticAggregation {
    /// Fraction of each worker's responses equal to the generating label.
    pub fn worker_accuracy(&self) -> Vec<f64> {
        let mut hit = vec![0usize; self.worker_ids.len()];
        let mut n = vec![0usize; self.worker_ids.len()];
        for r in &self.records {
            let j = self.worker_ids.binary_search(&r.worker_id).expect("known worker");
            let i = self.item_ids.binary_search(&r.item_id).expect("known item");
            n[j] += 1;
            hit[j] += (r.response == self.true_labels[i]) as usize;
        }
        hit.iter().zip(&n).map(|(&h, &n)| if n == 0 { 0.0 } else { h as f64 / n as f64 }).collect()
    }
}

fn ids(prefix: &str, n: usize) -> Vec<String> {
    let width = n.to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

fn draw(rng: &mut ChaCha8Rng, p: &[f64; 3]) -> Stance {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return Stance::from_index(k).expect("k < 3");
        }
    }
    Stance::Agree
}

pub fn simulate_aggregation(s: &AggregationScenario, seed: u64) -> SyntheticAggregation {
    assert!(s.per_item <= s.n_workers, "per_item exceeds worker count");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = s.proportions.map(f64::ln);
    let nq = Normal::new(0.0, s.sigma_q).expect("sigma_q > 0");
    let nw = Normal::new(0.0, s.sigma_w).expect("sigma_w > 0");
    let beta = Beta::new(s.vigilance_beta.0, s.vigilance_beta.1).expect("beta parameters > 0");
    let q: Vec<[f64; 3]> = (0..s.n_items)
        .map(|_| [mu[0] + nq.sample(&mut rng), mu[1] + nq.sample(&mut rng), mu[2] + nq.sample(&mut rng)])
        .collect();
    let w: Vec<[f64; 3]> = (0..s.n_workers)
        .map(|_| [nw.sample(&mut rng), nw.sample(&mut rng), nw.sample(&mut rng)])
        .collect();
    let n_spam = (s.spammer_fraction * s.n_workers as f64).round() as usize;
    let vigilance: Vec<f64> = (0..s.n_workers)
        .map(|j| if j < n_spam { 0.0 } else { beta.sample(&mut rng) })
        .collect();
    let item_ids = ids("i", s.n_items);
    let worker_ids = ids("w", s.n_workers);
    let mut records = Vec::with_capacity(s.n_items * s.per_item);
    for i in 0..s.n_items {
        for j in sample(&mut rng, s.n_workers, s.per_item).into_iter() {
            let v = vigilance[j];
            let eta = [0, 1, 2].map(|k| v * q[i][k] + (1.0 - v) * w[j][k]);
            records.push(AnnotationRecord {
                item_id: item_ids[i].clone(),
                worker_id: worker_ids[j].clone(),
                response: draw(&mut rng, &softmax3(&eta)),
                round: None,
            });
        }
    }
    let true_labels = q.iter().map(|qi| Stance::argmax(&softmax3(qi))).collect();
    SyntheticAggregation {
        records,
        item_ids,
        worker_ids,
        q,
        w,
        vigilance,
        true_labels,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalScenario {
    pub n_items: usize,
    pub n_workers: usize,
    pub per_item: usize,
    pub sigma_q: f64,
    pub sigma_w: f64,
    pub c1: f64,
    pub c2: f64,
    /// Covariate name, prevalence, coefficient.
    pub covariates: Vec<(String, f64, f64)>,
}

impl Default for OrdinalScenario {
    /// One planted covariate at an agree-vs-neutral odds ratio of 1.3 and
    /// two null covariates.
    fn default() -> Self {
        let (c1, c2) = (-0.8, 0.8);
        OrdinalScenario {
            n_items: 1000,
            n_workers: 1000,
            per_item: 30,
            sigma_q: 1.0,
            sigma_w: 0.3,
            c1,
            c2,
            covariates: vec![
                ("planted".into(), 0.5, beta_for_odds_ratio(1.3, 0.0, c1, c2)),
                ("null_a".into(), 0.5, 0.0),
                ("null_b".into(), 0.3, 0.0),
            ],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticOrdinal {
    pub records: Vec<AnnotationRecord>,
    pub profiles: ProfileTable,
    pub q: Vec<f64>,
    pub w: Vec<f64>,
}

/// Coefficient giving the requested agree-vs-neutral odds ratio at `eta0`.
pub fn beta_for_odds_ratio(target: f64, eta0: f64, c1: f64, c2: f64) -> f64 {
    let f = |b: f64| median_item_odds_ratios(eta0, b, c1, c2).0.ln() - target.ln();
    let (mut lo, mut hi) = (-20.0, 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn simulate_ordinal(s: &OrdinalScenario, seed: u64) -> SyntheticOrdinal {
    assert!(s.per_item <= s.n_workers, "per_item exceeds worker count");
    assert!(s.c1 < s.c2, "cutpoints out of order");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nq = Normal::new(0.0, s.sigma_q).expect("sigma_q > 0");
    let nw = Normal::new(0.0, s.sigma_w).expect("sigma_w > 0");
    let q: Vec<f64> = (0..s.n_items).map(|_| nq.sample(&mut rng)).collect();
    let worker_ids = ids("w", s.n_workers);
    let mut profiles = Vec::with_capacity(s.n_workers);
    let mut w = Vec::with_capacity(s.n_workers);
    for id in &worker_ids {
        let x: Vec<f64> = s.covariates.iter().map(|(_, p, _)| rng.gen_bool(*p) as u8 as f64).collect();
        let mean: f64 = x.iter().zip(&s.covariates).map(|(xi, (_, _, b))| xi * b).sum();
        w.push(mean + nw.sample(&mut rng));
        profiles.push(AnnotatorProfile {
            worker_id: id.clone(),
            covariates: x,
        });
    }
    let item_ids = ids("i", s.n_items);
    let mut records = Vec::with_capacity(s.n_items * s.per_item);
    for i in 0..s.n_items {
        for j in sample(&mut rng, s.n_workers, s.per_item).into_iter() {
            let lp = ordinal_log_probs(q[i] + w[j], s.c1, s.c2);
            records.push(AnnotationRecord {
                item_id: item_ids[i].clone(),
                worker_id: worker_ids[j].clone(),
                response: draw(&mut rng, &lp.map(f64::exp)),
                round: None,
            });
        }
    }
    SyntheticOrdinal {
        records,
        profiles: ProfileTable {
            columns: s.covariates.iter().map(|(n, _, _)| n.clone()).collect(),
            profiles,
        },
        q,
        w,
    }
}
