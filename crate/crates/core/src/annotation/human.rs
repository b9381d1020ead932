use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_aggregation, AggregationConfig, AnnotationError, AnnotationRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HumanPerfConfig {
    pub repeats: usize,
    pub holdout_fraction: f64,
    pub aggregation: AggregationConfig,
    pub variance_floor: f64,
    pub em_max_iterations: usize,
    pub em_tolerance: f64,
    pub seed: u64,
}

impl Default for HumanPerfConfig {
    fn default() -> Self {
        HumanPerfConfig {
            repeats: 10,
            holdout_fraction: 0.1,
            aggregation: AggregationConfig::default(),
            variance_floor: 1e-4,
            em_max_iterations: 1000,
            em_tolerance: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutAccuracy {
    pub repeat: usize,
    pub worker_id: String,
    pub scored: usize,
    pub accuracy: f64,
}

/// Two-component univariate Gaussian mixture; component 1 has the larger
/// mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoGaussians {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub variances: [f64; 2],
    pub log_likelihood: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanPerformance {
    pub accuracies: Vec<HoldoutAccuracy>,
    pub mixture: TwoGaussians,
    pub high_component_mean: f64,
    pub config: HumanPerfConfig,
}

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((x - mean) * (x - mean) / var + var.ln() + (2.0 * std::f64::consts::PI).ln())
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Expectation-maximization for a two-component mixture, started from the
/// quartiles with variances floored at `variance_floor`.
pub fn fit_two_gaussians(data: &[f64], variance_floor: f64, max_iterations: usize, tolerance: f64) -> TwoGaussians {
    assert!(!data.is_empty(), "mixture needs data");
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = data.len() as f64;
    let mean: f64 = data.iter().sum::<f64>() / n;
    let var0 = (data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).max(variance_floor);
    let mut means = [quantile(&sorted, 0.25), quantile(&sorted, 0.75)];
    let mut vars = [var0, var0];
    let mut weights = [0.5f64, 0.5];
    let mut prev = f64::NEG_INFINITY;
    let mut ll = prev;
    let mut iterations = 0;
    let mut resp = vec![[0.0f64; 2]; data.len()];
    for it in 0..max_iterations {
        iterations = it + 1;
        ll = 0.0;
        for (x, r) in data.iter().zip(resp.iter_mut()) {
            let l = [
                weights[0].ln() + log_normal_pdf(*x, means[0], vars[0]),
                weights[1].ln() + log_normal_pdf(*x, means[1], vars[1]),
            ];
            let m = l[0].max(l[1]);
            let lse = m + ((l[0] - m).exp() + (l[1] - m).exp()).ln();
            ll += lse;
            *r = [(l[0] - lse).exp(), (l[1] - lse).exp()];
        }
        for k in 0..2 {
            let nk: f64 = resp.iter().map(|r| r[k]).sum();
            if nk <= 1e-12 {
                continue;
            }
            weights[k] = nk / n;
            means[k] = data.iter().zip(&resp).map(|(x, r)| r[k] * x).sum::<f64>() / nk;
            vars[k] = (data.iter().zip(&resp).map(|(x, r)| r[k] * (x - means[k]).powi(2)).sum::<f64>() / nk).max(variance_floor);
        }
        if (ll - prev).abs() <= tolerance * ll.abs().max(1.0) {
            break;
        }
        prev = ll;
    }
    if means[0] > means[1] {
        means.swap(0, 1);
        vars.swap(0, 1);
        weights.swap(0, 1);
    }
    TwoGaussians {
        weights,
        means,
        variances: vars,
        log_likelihood: ll,
        iterations,
    }
}

/// Refits the aggregation model with random annotator subsets held out and
/// scores each held-out annotator against the inferred labels.
pub fn estimate_human_performance(
    records: &[AnnotationRecord],
    config: &HumanPerfConfig,
) -> Result<HumanPerformance, AnnotationError> {
    let workers: Vec<String> = records
        .iter()
        .map(|r| r.worker_id.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if workers.len() < 10 {
        return Err(AnnotationError::Invalid(format!(
            "human performance needs at least 10 annotators, found {}",
            workers.len()
        )));
    }
    if !(config.holdout_fraction > 0.0 && config.holdout_fraction < 1.0) || config.repeats == 0 {
        return Err(AnnotationError::Invalid("holdout fraction must be in (0, 1) and repeats positive".into()));
    }
    let k = ((workers.len() as f64 * config.holdout_fraction).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let holdouts: Vec<Vec<String>> = (0..config.repeats)
        .map(|_| {
            let mut w = workers.clone();
            w.shuffle(&mut rng);
            let mut h = w[..k].to_vec();
            h.sort();
            h
        })
        .collect();

    let per_repeat: Vec<Result<Vec<HoldoutAccuracy>, AnnotationError>> = holdouts
        .par_iter()
        .enumerate()
        .map(|(repeat, held)| {
            let train: Vec<AnnotationRecord> = records
                .iter()
                .filter(|r| held.binary_search(&r.worker_id).is_err())
                .cloned()
                .collect();
            let fit = fit_aggregation(&train, &config.aggregation)?;
            let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
            for r in records.iter().filter(|r| held.binary_search(&r.worker_id).is_ok()) {
                if let Some(i) = fit.item_index(&r.item_id) {
                    let e = tally.entry(r.worker_id.as_str()).or_default();
                    e.0 += (fit.label(i) == r.response) as usize;
                    e.1 += 1;
                }
            }
            Ok(tally
                .into_iter()
                .map(|(w, (hit, n))| HoldoutAccuracy {
                    repeat,
                    worker_id: w.to_string(),
                    scored: n,
                    accuracy: hit as f64 / n as f64,
                })
                .collect())
        })
        .collect();
    let mut accuracies = Vec::new();
    for r in per_repeat {
        accuracies.extend(r?);
    }
    if accuracies.is_empty() {
        return Err(AnnotationError::Invalid("no held-out annotation could be scored".into()));
    }
    let values: Vec<f64> = accuracies.iter().map(|a| a.accuracy).collect();
    let mixture = fit_two_gaussians(&values, config.variance_floor, config.em_max_iterations, config.em_tolerance);
    Ok(HumanPerformance {
        high_component_mean: mixture.means[1],
        accuracies,
        mixture,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn mixture_recovers_planted_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let hi = Normal::new(0.85, 0.05).unwrap();
        let lo = Normal::new(0.35, 0.07).unwrap();
        let data: Vec<f64> = (0..4000)
            .map(|_| if rng.gen_bool(0.7) { hi.sample(&mut rng) } else { lo.sample(&mut rng) })
            .collect();
        let m = fit_two_gaussians(&data, 1e-6, 1000, 1e-12);
        assert!((m.means[1] - 0.85).abs() < 0.01);
        assert!((m.means[0] - 0.35).abs() < 0.01);
        assert!((m.weights[1] - 0.7).abs() < 0.03);
        assert!((m.variances[1].sqrt() - 0.05).abs() < 0.01);
    }

    #[test]
    fn constant_data_uses_floor() {
        let m = fit_two_gaussians(&[1.0; 50], 1e-4, 100, 1e-12);
        assert_eq!(m.means, [1.0, 1.0]);
        assert!(m.variances.iter().all(|&v| v >= 1e-4));
    }

    #[test]
    fn too_few_annotators() {
        let recs: Vec<AnnotationRecord> = (0..9)
            .map(|w| AnnotationRecord {
                item_id: "i".into(),
                worker_id: format!("w{w}"),
                response: crate::label::Stance::Agree,
                round: None,
            })
            .collect();
        assert!(estimate_human_performance(&recs, &HumanPerfConfig::default()).is_err());
    }
}
