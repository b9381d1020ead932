use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::label::Stance;
use crate::optim::{LbfgsConfig, Objective};

use super::{alternate, AnnotationError, AnnotationRecord, Dataset, ProfileTable, VariancePrior, VarianceSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrdinalConfig {
    pub optimizer: LbfgsConfig,
    pub sigma_q_prior: VariancePrior,
    pub sigma_w_prior: VariancePrior,
    pub beta_prior_sd: f64,
    pub cutpoint_prior_sd: f64,
    pub variance_updates: VarianceSchedule,
    pub seed: u64,
}

impl Default for OrdinalConfig {
    fn default() -> Self {
        OrdinalConfig {
            optimizer: LbfgsConfig::default(),
            sigma_q_prior: VariancePrior::default(),
            sigma_w_prior: VariancePrior::default(),
            beta_prior_sd: 2.0,
            cutpoint_prior_sd: 2.0,
            variance_updates: VarianceSchedule::default(),
            seed: 0,
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `[ln p(1), ln p(2), ln p(3)]` for linear predictor `eta` and cutpoints
/// `c1 < c2`.
pub fn ordinal_log_probs(eta: f64, c1: f64, c2: f64) -> [f64; 3] {
    let (a, b) = (eta - c1, eta - c2);
    [
        -softplus(a),
        -softplus(-a) - softplus(b) + (-(-(c2 - c1)).exp_m1()).ln(),
        -softplus(-b),
    ]
}

/// Observed information of one response in `eta`.
fn response_information(y: Stance, eta: f64, c1: f64, c2: f64) -> f64 {
    let (ga, gb) = (logistic(eta - c1), logistic(eta - c2));
    match y {
        Stance::Disagree => ga * (1.0 - ga),
        Stance::Agree => gb * (1.0 - gb),
        Stance::Neutral => ga * (1.0 - ga) + gb * (1.0 - gb),
    }
}

/// Log-likelihood of one response and its derivatives in
/// `(eta, c1, c2)`.
fn response_terms(y: Stance, eta: f64, c1: f64, c2: f64) -> (f64, f64, f64, f64) {
    let (a, b) = (eta - c1, eta - c2);
    match y {
        Stance::Disagree => {
            let ga = logistic(a);
            (-softplus(a), -ga, ga, 0.0)
        }
        Stance::Agree => {
            let gnb = logistic(-b);
            (-softplus(-b), gnb, 0.0, -gnb)
        }
        Stance::Neutral => {
            let delta = c2 - c1;
            let (ga, gb) = (logistic(a), logistic(b));
            let em = (-delta).exp();
            let ratio = em / (-(-delta).exp_m1());
            let ll = -softplus(-a) - softplus(b) + (-(-delta).exp_m1()).ln();
            (ll, 1.0 - ga - gb, -(1.0 - ga) - ratio, gb + ratio)
        }
    }
}

/// Negative log posterior of the hierarchical ordinal model over
/// `[q (per item), w (per worker), beta, c1, ln(c2 - c1), ln sigma_q, ln sigma_w]`.
#[derive(Debug, Clone)]
pub struct OrdinalObjective {
    pub n_items: usize,
    pub n_workers: usize,
    pub n_covariates: usize,
    pub obs: Vec<(usize, usize, Stance)>,
    /// Row-major worker covariates.
    pub covariates: Vec<f64>,
    pub sigma_q_prior: VariancePrior,
    pub sigma_w_prior: VariancePrior,
    pub beta_prior_sd: f64,
    pub cutpoint_prior_sd: f64,
    /// Holds `ln sigma_q`, `ln sigma_w` at their current values.
    pub freeze_variances: bool,
}

impl OrdinalObjective {
    pub fn w_offset(&self) -> usize {
        self.n_items
    }
    pub fn beta_offset(&self) -> usize {
        self.n_items + self.n_workers
    }
    pub fn c1_index(&self) -> usize {
        self.beta_offset() + self.n_covariates
    }

    fn x(&self, j: usize) -> &[f64] {
        &self.covariates[j * self.n_covariates..(j + 1) * self.n_covariates]
    }

    fn worker_mean(&self, x: &[f64], j: usize) -> f64 {
        let bo = self.beta_offset();
        self.x(j).iter().zip(&x[bo..bo + self.n_covariates]).map(|(a, b)| a * b).sum()
    }

    /// Laplace-approximate update of both variances, as in the aggregation
    /// model.
    pub fn variance_update(&self, x: &[f64]) -> (f64, f64) {
        let (wo, ci) = (self.w_offset(), self.c1_index());
        let (c1, c2) = (x[ci], x[ci] + x[ci + 1].exp());
        let mut hq = vec![(-2.0 * x[ci + 2]).exp(); self.n_items];
        let mut hw = vec![(-2.0 * x[ci + 3]).exp(); self.n_workers];
        for &(i, j, y) in &self.obs {
            let info = response_information(y, x[i] + x[wo + j], c1, c2);
            hq[i] += info;
            hw[j] += info;
        }
        let eq: f64 = (0..self.n_items).map(|i| x[i] * x[i] + 1.0 / hq[i]).sum();
        let ew: f64 = (0..self.n_workers)
            .map(|j| (x[wo + j] - self.worker_mean(x, j)).powi(2) + 1.0 / hw[j])
            .sum();
        (
            self.sigma_q_prior.update(eq, self.n_items),
            self.sigma_w_prior.update(ew, self.n_workers),
        )
    }
}

impl Objective for OrdinalObjective {
    fn dim(&self) -> usize {
        self.c1_index() + 4
    }

    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (wo, bo, ci) = (self.w_offset(), self.beta_offset(), self.c1_index());
        let c1 = x[ci];
        let ed = x[ci + 1].exp();
        let c2 = c1 + ed;
        let mut f = 0.0;
        let mut g_c1 = 0.0;
        let mut g_c2 = 0.0;
        for &(i, j, y) in &self.obs {
            let eta = x[i] + x[wo + j];
            let (ll, d_eta, d_c1, d_c2) = response_terms(y, eta, c1, c2);
            f -= ll;
            grad[i] -= d_eta;
            grad[wo + j] -= d_eta;
            g_c1 -= d_c1;
            g_c2 -= d_c2;
        }
        let (s_q, s_w) = (x[ci + 2], x[ci + 3]);
        let (iq, iw) = ((-2.0 * s_q).exp(), (-2.0 * s_w).exp());
        let mut ss_q = 0.0;
        for i in 0..self.n_items {
            ss_q += x[i] * x[i];
            grad[i] += x[i] * iq;
        }
        let mut ss_w = 0.0;
        for j in 0..self.n_workers {
            let xj = self.x(j);
            let r = x[wo + j] - self.worker_mean(x, j);
            ss_w += r * r;
            grad[wo + j] += r * iw;
            for p in 0..self.n_covariates {
                grad[bo + p] -= r * iw * xj[p];
            }
        }
        let (nq, nw) = (self.n_items as f64, self.n_workers as f64);
        f += 0.5 * ss_q * iq + nq * s_q + 0.5 * ss_w * iw + nw * s_w;
        grad[ci + 2] += nq - ss_q * iq;
        grad[ci + 3] += nw - ss_w * iw;
        let (pq, dpq) = self.sigma_q_prior.neg_log(s_q);
        let (pw, dpw) = self.sigma_w_prior.neg_log(s_w);
        f += pq + pw;
        grad[ci + 2] += dpq;
        grad[ci + 3] += dpw;

        let ib = 1.0 / (self.beta_prior_sd * self.beta_prior_sd);
        for p in 0..self.n_covariates {
            f += 0.5 * x[bo + p] * x[bo + p] * ib;
            grad[bo + p] += x[bo + p] * ib;
        }
        let ic = 1.0 / (self.cutpoint_prior_sd * self.cutpoint_prior_sd);
        f += 0.5 * (c1 * c1 + c2 * c2) * ic;
        g_c1 += c1 * ic;
        g_c2 += c2 * ic;
        grad[ci] += g_c1 + g_c2;
        grad[ci + 1] += g_c2 * ed;
        if self.freeze_variances {
            grad[ci + 2] = 0.0;
            grad[ci + 3] = 0.0;
        }
        f
    }
}

/// Odds-scale summaries of one covariate coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateEffect {
    pub name: String,
    pub beta: f64,
    pub exp_beta: f64,
    /// Change in odds of "agree" over "neutral" for the median item when the
    /// indicator switches on.
    pub odds_ratio_agree_vs_neutral: f64,
    pub odds_ratio_neutral_vs_disagree: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalFit {
    pub items: Vec<String>,
    pub workers: Vec<String>,
    pub columns: Vec<String>,
    pub q: Vec<f64>,
    pub w: Vec<f64>,
    pub beta: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub sigma_q2: f64,
    pub sigma_w2: f64,
    /// Median of the fitted item stances, the reference point for odds
    /// ratios.
    pub median_eta: f64,
    pub effects: Vec<CovariateEffect>,
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub config: OrdinalConfig,
}

/// `ln p(3)/p(2)` and `ln p(2)/p(1)` differences between `eta0 + beta` and
/// `eta0`, exponentiated.
pub fn median_item_odds_ratios(eta0: f64, beta: f64, c1: f64, c2: f64) -> (f64, f64) {
    let l0 = ordinal_log_probs(eta0, c1, c2);
    let l1 = ordinal_log_probs(eta0 + beta, c1, c2);
    (((l1[2] - l1[1]) - (l0[2] - l0[1])).exp(), ((l1[1] - l1[0]) - (l0[1] - l0[0])).exp())
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn solve_spd(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs()))?;
        if a[piv][k].abs() < 1e-12 {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for r in k + 1..n {
            let f = a[r][k] / a[k][k];
            for c in k..n {
                a[r][c] -= f * a[k][c];
            }
            b[r] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| a[k][c] * x[c]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

/// Checks `[1 | X]` for full column rank. On failure returns every column
/// involved in a linear dependency.
pub fn check_rank(columns: &[String], rows: &[Vec<f64>]) -> Result<(), AnnotationError> {
    let names: Vec<String> = std::iter::once("(intercept)".to_string()).chain(columns.iter().cloned()).collect();
    let col = |k: usize| -> Vec<f64> { rows.iter().map(|r| if k == 0 { 1.0 } else { r[k - 1] }).collect() };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut accepted: Vec<usize> = Vec::new();
    let mut involved = std::collections::BTreeSet::new();
    for k in 0..names.len() {
        let v = col(k);
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        let mut r = v.clone();
        for b in &basis {
            let p: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
            r.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let rn2: f64 = r.iter().map(|x| x * x).sum();
        if rn2 <= 1e-10 * norm2.max(1.0) {
            involved.insert(k);
            if norm2 > 0.0 && !accepted.is_empty() {
                let a: Vec<Vec<f64>> = accepted.iter().map(|&c| col(c)).collect();
                let gram: Vec<Vec<f64>> = a.iter().map(|x| a.iter().map(|y| x.iter().zip(y).map(|(p, q)| p * q).sum()).collect()).collect();
                let rhs: Vec<f64> = a.iter().map(|x| x.iter().zip(&v).map(|(p, q)| p * q).sum()).collect();
                if let Some(coef) = solve_spd(gram, rhs) {
                    for (c, &idx) in coef.iter().zip(&accepted) {
                        if c.abs() > 1e-8 {
                            involved.insert(idx);
                        }
                    }
                }
            }
        } else {
            let n = rn2.sqrt();
            basis.push(r.into_iter().map(|x| x / n).collect());
            accepted.push(k);
        }
    }
    if involved.is_empty() {
        Ok(())
    } else {
        Err(AnnotationError::RankDeficient(involved.into_iter().map(|k| names[k].clone()).collect()))
    }
}

/// MAP estimate of the hierarchical ordinal model with worker biases drawn
/// around `beta . X_j`.
pub fn fit_ordinal(
    records: &[AnnotationRecord],
    profiles: &ProfileTable,
    config: &OrdinalConfig,
) -> Result<OrdinalFit, AnnotationError> {
    let data = Dataset::new(records)?;
    let by_worker: BTreeMap<&str, &[f64]> = profiles
        .profiles
        .iter()
        .map(|p| (p.worker_id.as_str(), p.covariates.as_slice()))
        .collect();
    let p = profiles.columns.len();
    let mut rows = Vec::with_capacity(data.workers.len());
    for w in &data.workers {
        let x = by_worker.get(w.as_str()).ok_or_else(|| AnnotationError::MissingProfile(w.clone()))?;
        if x.len() != p {
            return Err(AnnotationError::Invalid(format!("profile for {w:?} has {} covariates, expected {p}", x.len())));
        }
        rows.push(x.to_vec());
    }
    let unused = profiles.profiles.len().saturating_sub(data.workers.len());
    if unused > 0 {
        log::warn!("{unused} profiled workers have no annotations and are ignored");
    }
    check_rank(&profiles.columns, &rows)?;

    let obj = OrdinalObjective {
        n_items: data.items.len(),
        n_workers: data.workers.len(),
        n_covariates: p,
        obs: data.obs.clone(),
        covariates: rows.concat(),
        sigma_q_prior: config.sigma_q_prior,
        sigma_w_prior: config.sigma_w_prior,
        beta_prior_sd: config.beta_prior_sd,
        cutpoint_prior_sd: config.cutpoint_prior_sd,
        freeze_variances: true,
    };
    let n = data.obs.len() as f64;
    let mut counts = [0.0f64; 3];
    for &(_, _, y) in &data.obs {
        counts[y.index()] += 1.0;
    }
    let clamp = |v: f64| v.clamp(1e-3, 1.0 - 1e-3);
    let ge2 = clamp((counts[1] + counts[2]) / n);
    let ge3 = clamp(counts[2] / n);
    let c1_0 = -(ge2 / (1.0 - ge2)).ln();
    let c2_0 = (-(ge3 / (1.0 - ge3)).ln()).max(c1_0 + 0.1);
    let mut x0 = vec![0.0; obj.dim()];
    let ci = obj.c1_index();
    x0[ci] = c1_0;
    x0[ci + 1] = (c2_0 - c1_0).ln();
    let run = alternate(&obj, x0, ci + 2, &config.optimizer, &config.variance_updates, |x| obj.variance_update(x));
    let (m, iterations) = (run.minimum, run.iterations);
    let converged = m.converged && run.settled;
    if !converged {
        log::warn!(
            "ordinal fit did not converge ({} iterations, gradient norm {:.3e}, variances settled: {})",
            iterations,
            m.gradient_norm,
            run.settled
        );
    }
    let x = &m.x;
    let q = x[..obj.n_items].to_vec();
    let w = x[obj.w_offset()..obj.beta_offset()].to_vec();
    let beta = x[obj.beta_offset()..ci].to_vec();
    let c1 = x[ci];
    let c2 = c1 + x[ci + 1].exp();
    let median_eta = median(&q);
    let effects = profiles
        .columns
        .iter()
        .zip(&beta)
        .map(|(name, &b)| {
            let (agree, neutral) = median_item_odds_ratios(median_eta, b, c1, c2);
            CovariateEffect {
                name: name.clone(),
                beta: b,
                exp_beta: b.exp(),
                odds_ratio_agree_vs_neutral: agree,
                odds_ratio_neutral_vs_disagree: neutral,
            }
        })
        .collect();
    Ok(OrdinalFit {
        items: data.items,
        workers: data.workers,
        columns: profiles.columns.clone(),
        q,
        w,
        beta,
        c1,
        c2,
        sigma_q2: (2.0 * x[ci + 2]).exp(),
        sigma_w2: (2.0 * x[ci + 3]).exp(),
        median_eta,
        effects,
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

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let eta = rng.gen_range(-30.0..30.0);
            let c1 = rng.gen_range(-5.0..5.0);
            let c2 = c1 + rng.gen_range(1e-4..6.0);
            let lp = ordinal_log_probs(eta, c1, c2);
            let s: f64 = lp.iter().map(|l| l.exp()).sum();
            assert!((s - 1.0).abs() < 1e-12, "{eta} {c1} {c2}: {s}");
            // Direct CDF differences as an independent oracle.
            let g = |z: f64| 1.0 / (1.0 + (-z).exp());
            let direct = [1.0 - g(eta - c1), g(eta - c1) - g(eta - c2), g(eta - c2)];
            for k in 0..3 {
                assert!((lp[k].exp() - direct[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn agree_vs_neutral_slope() {
        // d/d eta of ln(p3/p2) equals g(eta - c1).
        let (c1, c2) = (-0.7, 1.1);
        for eta in [-2.0, 0.0, 0.5, 3.0] {
            let h = 1e-6;
            let l = |e: f64| {
                let lp = ordinal_log_probs(e, c1, c2);
                lp[2] - lp[1]
            };
            let fd = (l(eta + h) - l(eta - h)) / (2.0 * h);
            assert!((fd - logistic(eta - c1)).abs() < 1e-7);
        }
    }

    fn small() -> OrdinalObjective {
        OrdinalObjective {
            n_items: 3,
            n_workers: 3,
            n_covariates: 2,
            obs: vec![
                (0, 0, Stance::Agree),
                (0, 1, Stance::Neutral),
                (1, 2, Stance::Disagree),
                (2, 0, Stance::Neutral),
                (2, 2, Stance::Agree),
                (1, 1, Stance::Neutral),
            ],
            covariates: vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            sigma_q_prior: VariancePrior::default(),
            sigma_w_prior: VariancePrior { shape: 2.0, scale: 0.3 },
            beta_prior_sd: 2.0,
            cutpoint_prior_sd: 1.5,
            freeze_variances: false,
        }
    }

    /// Negative log posterior from plain CDF differences.
    fn reference_value(o: &OrdinalObjective, x: &[f64]) -> f64 {
        let g = |z: f64| 1.0 / (1.0 + (-z).exp());
        let ci = o.c1_index();
        let (c1, c2) = (x[ci], x[ci] + x[ci + 1].exp());
        let var_q = (2.0 * x[ci + 2]).exp();
        let var_w = (2.0 * x[ci + 3]).exp();
        let mut f = 0.0;
        for &(i, j, y) in &o.obs {
            let eta = x[i] + x[o.n_items + j];
            let p = match y {
                Stance::Disagree => 1.0 - g(eta - c1),
                Stance::Neutral => g(eta - c1) - g(eta - c2),
                Stance::Agree => g(eta - c2),
            };
            f -= p.ln();
        }
        let normal = |v: f64, m: f64, var: f64| (v - m) * (v - m) / (2.0 * var) + 0.5 * var.ln();
        for i in 0..o.n_items {
            f += normal(x[i], 0.0, var_q);
        }
        for j in 0..o.n_workers {
            let m: f64 = (0..o.n_covariates).map(|p| o.covariates[j * o.n_covariates + p] * x[o.beta_offset() + p]).sum();
            f += normal(x[o.n_items + j], m, var_w);
        }
        for p in 0..o.n_covariates {
            f += x[o.beta_offset() + p].powi(2) / (2.0 * o.beta_prior_sd.powi(2));
        }
        f += (c1 * c1 + c2 * c2) / (2.0 * o.cutpoint_prior_sd.powi(2));
        let ig = |p: &VariancePrior, var: f64| (p.shape + 1.0) * var.ln() + p.scale / var;
        f + ig(&o.sigma_q_prior, var_q) + ig(&o.sigma_w_prior, var_w)
    }

    #[test]
    fn value_and_gradient() {
        let o = small();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let x: Vec<f64> = (0..o.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut g = vec![0.0; o.dim()];
            let f = o.eval(&x, &mut g);
            assert!((f - reference_value(&o, &x)).abs() < 1e-10 * f.abs().max(1.0));
            for d in 0..o.dim() {
                let h = 1e-5;
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[d] += h;
                xm[d] -= h;
                let mut t = vec![0.0; o.dim()];
                let fd = (o.eval(&xp, &mut t) - o.eval(&xm, &mut t)) / (2.0 * h);
                assert!((fd - g[d]).abs() / g[d].abs().max(1.0) < 1e-6, "coord {d}");
            }
        }
    }

    #[test]
    fn rank_check_names_columns() {
        let cols: Vec<String> = ["democrat", "republican", "other"].iter().map(|s| s.to_string()).collect();
        let rows = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]];
        match check_rank(&cols, &rows) {
            Err(AnnotationError::RankDeficient(names)) => {
                assert_eq!(names, vec!["(intercept)", "democrat", "republican", "other"]);
            }
            other => panic!("{other:?}"),
        }
        let rows = vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 1.0]];
        assert!(check_rank(&cols, &rows).is_ok());
        let rows = vec![vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 1.0]];
        match check_rank(&cols, &rows) {
            Err(AnnotationError::RankDeficient(names)) => assert_eq!(names, vec!["democrat", "republican"]),
            other => panic!("{other:?}"),
        }
    }
}
