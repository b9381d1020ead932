use serde::{Deserialize, Serialize};

use crate::label::Stance;
use crate::optim::{LbfgsConfig, Objective};

use super::{alternate, log_sum_exp, softmax3, AnnotationError, AnnotationRecord, Dataset, VariancePrior, VarianceSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationConfig {
    pub optimizer: LbfgsConfig,
    pub sigma_q_prior: VariancePrior,
    pub sigma_w_prior: VariancePrior,
    /// Starting vigilance for every worker.
    pub initial_vigilance: f64,
    /// Holds every vigilance at this value instead of estimating it.
    pub fixed_vigilance: Option<f64>,
    pub variance_updates: VarianceSchedule,
    pub seed: u64,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            optimizer: LbfgsConfig::default(),
            sigma_q_prior: VariancePrior::default(),
            sigma_w_prior: VariancePrior::default(),
            initial_vigilance: 0.7,
            fixed_vigilance: None,
            variance_updates: VarianceSchedule::default(),
            seed: 0,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Negative log posterior of the vigilance model over
/// `[q (3 per item), w (3 per worker), logit v (per worker), ln sigma_q, ln sigma_w]`.
#[derive(Debug, Clone)]
pub struct AggregationObjective {
    pub n_items: usize,
    pub n_workers: usize,
    pub obs: Vec<(usize, usize, Stance)>,
    pub mu: [f64; 3],
    pub sigma_q_prior: VariancePrior,
    pub sigma_w_prior: VariancePrior,
    pub fixed_vigilance: Option<f64>,
    /// Holds `ln sigma_q`, `ln sigma_w` at their current values.
    pub freeze_variances: bool,
}

impl AggregationObjective {
    pub fn w_offset(&self) -> usize {
        3 * self.n_items
    }

    pub fn u_offset(&self) -> usize {
        3 * self.n_items + 3 * self.n_workers
    }

    pub fn sq_index(&self) -> usize {
        self.u_offset() + self.n_workers
    }

    fn vigilance(&self, x: &[f64], j: usize) -> f64 {
        match self.fixed_vigilance {
            Some(v) => v,
            None => sigmoid(x[self.u_offset() + j]),
        }
    }
}

impl Objective for AggregationObjective {
    fn dim(&self) -> usize {
        self.sq_index() + 2
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (wo, uo, sq) = (self.w_offset(), self.u_offset(), self.sq_index());
        let mut f = 0.0;
        for &(i, j, y) in &self.obs {
            let v = self.vigilance(x, j);
            let q = &x[3 * i..3 * i + 3];
            let w = &x[wo + 3 * j..wo + 3 * j + 3];
            let eta = [
                v * q[0] + (1.0 - v) * w[0],
                v * q[1] + (1.0 - v) * w[1],
                v * q[2] + (1.0 - v) * w[2],
            ];
            let lse = log_sum_exp(&eta);
            let yk = y.index();
            f -= eta[yk] - lse;
            let mut du = 0.0;
            for k in 0..3 {
                let r = (eta[k] - lse).exp() - if k == yk { 1.0 } else { 0.0 };
                grad[3 * i + k] += v * r;
                grad[wo + 3 * j + k] += (1.0 - v) * r;
                du += r * (q[k] - w[k]);
            }
            if self.fixed_vigilance.is_none() {
                grad[uo + j] += du * v * (1.0 - v);
            }
        }
        if self.fixed_vigilance.is_none() {
            // Uniform prior on v expressed in logit coordinates.
            for j in 0..self.n_workers {
                let u = x[uo + j];
                f += softplus(u) + softplus(-u);
                grad[uo + j] += 2.0 * sigmoid(u) - 1.0;
            }
        }
        let (s_q, s_w) = (x[sq], x[sq + 1]);
        let (iq, iw) = ((-2.0 * s_q).exp(), (-2.0 * s_w).exp());
        let mut ss_q = 0.0;
        for i in 0..self.n_items {
            for k in 0..3 {
                let d = x[3 * i + k] - self.mu[k];
                ss_q += d * d;
                grad[3 * i + k] += d * iq;
            }
        }
        let mut ss_w = 0.0;
        for idx in wo..uo {
            let d = x[idx];
            ss_w += d * d;
            grad[idx] += d * iw;
        }
        let nq = (3 * self.n_items) as f64;
        let nw = (3 * self.n_workers) as f64;
        f += 0.5 * ss_q * iq + nq * s_q + 0.5 * ss_w * iw + nw * s_w;
        grad[sq] += nq - ss_q * iq;
        grad[sq + 1] += nw - ss_w * iw;
        let (pq, dpq) = self.sigma_q_prior.neg_log(s_q);
        let (pw, dpw) = self.sigma_w_prior.neg_log(s_w);
        f += pq + pw;
        grad[sq] += dpq;
        grad[sq + 1] += dpw;
        if self.freeze_variances {
            grad[sq] = 0.0;
            grad[sq + 1] = 0.0;
        }
        f
    }
}

impl AggregationObjective {
    /// Laplace-approximate update of both variances: expected squared
    /// deviations use the diagonal of the negative log-likelihood Hessian
    /// plus the prior precision, combined with the inverse-gamma prior.
    pub fn variance_update(&self, x: &[f64]) -> (f64, f64) {
        let (wo, uo, sq) = (self.w_offset(), self.u_offset(), self.sq_index());
        let (iq, iw) = ((-2.0 * x[sq]).exp(), (-2.0 * x[sq + 1]).exp());
        let mut hq = vec![iq; 3 * self.n_items];
        let mut hw = vec![iw; 3 * self.n_workers];
        for &(i, j, _) in &self.obs {
            let v = self.vigilance(x, j);
            let q = &x[3 * i..3 * i + 3];
            let w = &x[wo + 3 * j..wo + 3 * j + 3];
            let eta = [0, 1, 2].map(|k| v * q[k] + (1.0 - v) * w[k]);
            let p = softmax3(&eta);
            for k in 0..3 {
                let c = p[k] * (1.0 - p[k]);
                hq[3 * i + k] += v * v * c;
                hw[3 * j + k] += (1.0 - v) * (1.0 - v) * c;
            }
        }
        let eq: f64 = (0..3 * self.n_items)
            .map(|t| (x[t] - self.mu[t % 3]).powi(2) + 1.0 / hq[t])
            .sum();
        let ew: f64 = (wo..uo).map(|t| x[t] * x[t] + 1.0 / hw[t - wo]).sum();
        (
            self.sigma_q_prior.update(eq, 3 * self.n_items),
            self.sigma_w_prior.update(ew, 3 * self.n_workers),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationFit {
    pub items: Vec<String>,
    pub workers: Vec<String>,
    /// Per-item label scores, indexed by [`Stance::index`].
    pub q: Vec<[f64; 3]>,
    pub w: Vec<[f64; 3]>,
    pub vigilance: Vec<f64>,
    pub mu: [f64; 3],
    pub sigma_q2: f64,
    pub sigma_w2: f64,
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub config: AggregationConfig,
}

impl AggregationFit {
    /// Softmax of the item's label scores.
    pub fn distribution(&self, item: usize) -> [f64; 3] {
        softmax3(&self.q[item])
    }

    pub fn label(&self, item: usize) -> Stance {
        Stance::argmax(&self.distribution(item))
    }

    pub fn item_index(&self, item_id: &str) -> Option<usize> {
        self.items.binary_search_by(|x| x.as_str().cmp(item_id)).ok()
    }

    pub fn worker_index(&self, worker_id: &str) -> Option<usize> {
        self.workers.binary_search_by(|x| x.as_str().cmp(worker_id)).ok()
    }

    /// Items per argmax label, indexed by [`Stance::index`].
    pub fn label_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for i in 0..self.items.len() {
            c[self.label(i).index()] += 1;
        }
        c
    }
}

/// MAP estimate of the vigilance aggregation model.
pub fn fit_aggregation(records: &[AnnotationRecord], config: &AggregationConfig) -> Result<AggregationFit, AnnotationError> {
    if let Some(v) = config.fixed_vigilance {
        if !(0.0..=1.0).contains(&v) {
            return Err(AnnotationError::Invalid(format!("fixed vigilance {v} outside [0, 1]")));
        }
    }
    if !(config.initial_vigilance > 0.0 && config.initial_vigilance < 1.0) {
        return Err(AnnotationError::Invalid("initial vigilance must lie in (0, 1)".into()));
    }
    let data = Dataset::new(records)?;
    let (n_items, n_workers) = (data.items.len(), data.workers.len());
    let mut totals = [0usize; 3];
    for &(_, _, y) in &data.obs {
        totals[y.index()] += 1;
    }
    let n = data.obs.len() as f64;
    let mu = totals.map(|c| ((c as f64 + 0.5) / (n + 1.5)).ln());
    let mu_sum: f64 = mu.iter().sum();

    let obj = AggregationObjective {
        n_items,
        n_workers,
        obs: data.obs.clone(),
        mu,
        sigma_q_prior: config.sigma_q_prior,
        sigma_w_prior: config.sigma_w_prior,
        fixed_vigilance: config.fixed_vigilance,
        freeze_variances: true,
    };
    let mut x0 = vec![0.0; obj.dim()];
    for (i, c) in data.item_counts().iter().enumerate() {
        let tot: usize = c.iter().sum();
        let raw: Vec<f64> = c.iter().map(|&k| ((k as f64 + 1.0) / (tot as f64 + 3.0)).ln()).collect();
        let shift = (mu_sum - raw.iter().sum::<f64>()) / 3.0;
        for k in 0..3 {
            x0[3 * i + k] = raw[k] + shift;
        }
    }
    let u0 = logit(config.initial_vigilance);
    for j in 0..n_workers {
        x0[obj.u_offset() + j] = u0;
    }
    let sq = obj.sq_index();
    let run = alternate(&obj, x0, sq, &config.optimizer, &config.variance_updates, |x| obj.variance_update(x));
    let (m, iterations, variances_settled) = (run.minimum, run.iterations, run.settled);
    let converged = m.converged && variances_settled;
    if !converged {
        log::warn!(
            "aggregation fit did not converge ({} iterations, gradient norm {:.3e}, variances settled: {variances_settled})",
            iterations,
            m.gradient_norm
        );
    }
    let x = &m.x;
    let q = (0..n_items)
        .map(|i| {
            let row = [x[3 * i], x[3 * i + 1], x[3 * i + 2]];
            let shift = (mu_sum - row.iter().sum::<f64>()) / 3.0;
            row.map(|v| v + shift)
        })
        .collect();
    let wo = obj.w_offset();
    let w = (0..n_workers).map(|j| [x[wo + 3 * j], x[wo + 3 * j + 1], x[wo + 3 * j + 2]]).collect();
    let vigilance = (0..n_workers).map(|j| obj.vigilance(x, j)).collect();
    Ok(AggregationFit {
        items: data.items,
        workers: data.workers,
        q,
        w,
        vigilance,
        mu,
        sigma_q2: (2.0 * x[sq]).exp(),
        sigma_w2: (2.0 * x[sq + 1]).exp(),
        objective: m.value,
        gradient_norm: m.gradient_norm,
        iterations,
        converged,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(i: &str, w: &str, y: Stance) -> AnnotationRecord {
        AnnotationRecord {
            item_id: i.into(),
            worker_id: w.into(),
            response: y,
            round: None,
        }
    }

    fn small_objective(fixed: Option<f64>) -> AggregationObjective {
        AggregationObjective {
            n_items: 3,
            n_workers: 2,
            obs: vec![
                (0, 0, Stance::Agree),
                (0, 1, Stance::Neutral),
                (1, 0, Stance::Disagree),
                (2, 1, Stance::Agree),
                (1, 1, Stance::Disagree),
            ],
            mu: [-1.2, -0.9, -1.0],
            sigma_q_prior: VariancePrior::default(),
            sigma_w_prior: VariancePrior { shape: 2.0, scale: 1.0 },
            fixed_vigilance: fixed,
            freeze_variances: false,
        }
    }

    fn reference_nll(o: &AggregationObjective, x: &[f64]) -> f64 {
        let mut nll = 0.0;
        for &(i, j, y) in &o.obs {
            let v = o.fixed_vigilance.unwrap_or(1.0 / (1.0 + (-x[o.u_offset() + j]).exp()));
            let eta: Vec<f64> = (0..3).map(|k| v * x[3 * i + k] + (1.0 - v) * x[o.w_offset() + 3 * j + k]).collect();
            let z: f64 = eta.iter().map(|e| e.exp()).sum();
            nll -= (eta[y.index()].exp() / z).ln();
        }
        nll
    }

    /// Negative log posterior written out term by term, sharing no code
    /// with the objective.
    fn reference_value(o: &AggregationObjective, x: &[f64]) -> f64 {
        let sq = o.sq_index();
        let var_q = (2.0 * x[sq]).exp();
        let var_w = (2.0 * x[sq + 1]).exp();
        let mut nll = reference_nll(o, x);
        for i in 0..o.n_items {
            for k in 0..3 {
                let d = x[3 * i + k] - o.mu[k];
                nll += d * d / (2.0 * var_q) + 0.5 * var_q.ln();
            }
        }
        for idx in o.w_offset()..o.u_offset() {
            nll += x[idx] * x[idx] / (2.0 * var_w) + 0.5 * var_w.ln();
        }
        if o.fixed_vigilance.is_none() {
            for j in 0..o.n_workers {
                let v = 1.0 / (1.0 + (-x[o.u_offset() + j]).exp());
                nll -= v.ln() + (1.0 - v).ln();
            }
        }
        let ig = |p: &VariancePrior, var: f64| (p.shape + 1.0) * var.ln() + p.scale / var;
        nll + ig(&o.sigma_q_prior, var_q) + ig(&o.sigma_w_prior, var_w)
    }

    #[test]
    fn value_matches_reference_and_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for fixed in [None, Some(0.6)] {
            let o = small_objective(fixed);
            for _ in 0..10 {
                let x: Vec<f64> = (0..o.dim()).map(|_| rng.gen_range(-1.5..1.5)).collect();
                let mut g = vec![0.0; o.dim()];
                let f = o.eval(&x, &mut g);
                assert!((f - reference_value(&o, &x)).abs() < 1e-10 * f.abs().max(1.0));
                for d in 0..o.dim() {
                    let h = 1e-5;
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[d] += h;
                    xm[d] -= h;
                    let mut tmp = vec![0.0; o.dim()];
                    let fd = (o.eval(&xp, &mut tmp) - o.eval(&xm, &mut tmp)) / (2.0 * h);
                    let rel = (fd - g[d]).abs() / g[d].abs().max(1.0);
                    assert!(rel < 1e-6, "coord {d}: fd {fd} analytic {}", g[d]);
                }
            }
        }
    }

    #[test]
    fn shift_invariance_of_likelihood() {
        let o = small_objective(None);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..o.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut y = x.clone();
        for k in 0..3 {
            y[3 + k] += 2.5;
            y[o.w_offset() + k] -= 1.5;
        }
        assert!((reference_nll(&o, &x) - reference_nll(&o, &y)).abs() < 1e-10);
    }

    #[test]
    fn vigilance_extremes_isolate_terms() {
        let o1 = small_objective(Some(1.0));
        let o0 = small_objective(Some(0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..o1.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut g = vec![0.0; o1.dim()];
        o1.eval(&x, &mut g);
        assert!(g[o1.w_offset()..o1.u_offset()].iter().zip(&x[o1.w_offset()..o1.u_offset()]).all(|(gi, xi)| {
            let iw = (-2.0 * x[o1.sq_index() + 1]).exp();
            (gi - xi * iw).abs() < 1e-12
        }));
        o0.eval(&x, &mut g);
        let iq = (-2.0 * x[o0.sq_index()]).exp();
        for t in 0..9 {
            assert!((g[t] - (x[t] - o0.mu[t % 3]) * iq).abs() < 1e-12);
        }
    }

    #[test]
    fn unanimous_agree_with_full_vigilance() {
        let recs: Vec<_> = (0..8).map(|j| rec("i", &format!("w{j}"), Stance::Agree)).collect();
        let cfg = AggregationConfig {
            fixed_vigilance: Some(1.0),
            ..Default::default()
        };
        let fit = fit_aggregation(&recs, &cfg).unwrap();
        assert_eq!(fit.label(0), Stance::Agree);
        assert!(fit.converged);
        let d = fit.distribution(0);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((fit.q[0].iter().sum::<f64>() - fit.mu.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(fit_aggregation(&[], &AggregationConfig::default()), Err(AnnotationError::Empty)));
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let recs: Vec<_> = (0..60)
            .map(|n| rec(&format!("i{}", n % 12), &format!("w{}", n % 7), Stance::ALL[rng.gen_range(0..3)]))
            .collect();
        let a = fit_aggregation(&recs, &AggregationConfig::default()).unwrap();
        let b = fit_aggregation(&recs, &AggregationConfig::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.vigilance.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
