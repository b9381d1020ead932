//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Used by the annotation fitters and the linear stance model. Everything is
//! single-threaded and allocation order is fixed, so identical inputs give
//! bit-identical iterates.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// A smooth function to minimize.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Returns `f(x)` and writes the gradient into `grad`.
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Convergence when the gradient infinity-norm drops below this.
    pub gradient_tolerance: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iterations: 5000,
            gradient_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LINE_SEARCH: usize = 60;
/// Relative slack on the function value under which a step is judged by
/// its slope alone (approximate Wolfe conditions).
const VALUE_NOISE: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn two_loop(grad: &[f64], history: &VecDeque<Pair>) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for pair in history.iter().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        for (qi, yi) in q.iter_mut().zip(&pair.y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some(last) = history.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for (pair, a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = pair.rho * dot(&pair.y, &q);
        for (qi, si) in q.iter_mut().zip(&pair.s) {
            *qi += (a - b) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

struct Probe {
    step: f64,
    value: f64,
    grad: Vec<f64>,
    slope: f64,
}

fn probe<O: Objective>(obj: &O, x: &[f64], dir: &[f64], step: f64) -> Probe {
    let trial: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + step * di).collect();
    let mut grad = vec![0.0; x.len()];
    let mut value = obj.eval(&trial, &mut grad);
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        value = f64::INFINITY;
    }
    let slope = if value.is_finite() { dot(&grad, dir) } else { f64::NAN };
    Probe {
        step,
        value,
        grad,
        slope,
    }
}

/// Strong-Wolfe line search (bracketing + zoom). Returns `None` when no step
/// with sufficient decrease was found.
fn line_search<O: Objective>(
    obj: &O,
    x: &[f64],
    f0: f64,
    slope0: f64,
    dir: &[f64],
    initial_step: f64,
) -> Option<Probe> {
    let armijo = |p: &Probe| p.value <= f0 + C1 * p.step * slope0;
    let curvature = |p: &Probe| p.slope.abs() <= -C2 * slope0;
    let approximate = |p: &Probe| p.value <= f0 + VALUE_NOISE * f0.abs().max(1.0) && curvature(p);

    let mut prev = Probe {
        step: 0.0,
        value: f0,
        grad: Vec::new(),
        slope: slope0,
    };
    let mut step = initial_step;
    for i in 0..MAX_LINE_SEARCH {
        let cur = probe(obj, x, dir, step);
        if approximate(&cur) {
            return Some(cur);
        }
        if !armijo(&cur) || (i > 0 && cur.value >= prev.value) {
            return zoom(obj, x, f0, slope0, dir, prev, cur);
        }
        if curvature(&cur) {
            return Some(cur);
        }
        if cur.slope >= 0.0 {
            return zoom(obj, x, f0, slope0, dir, cur, prev);
        }
        step *= 2.0;
        prev = cur;
    }
    (prev.step > 0.0).then_some(prev)
}

fn zoom<O: Objective>(
    obj: &O,
    x: &[f64],
    f0: f64,
    slope0: f64,
    dir: &[f64],
    mut lo: Probe,
    mut hi: Probe,
) -> Option<Probe> {
    for _ in 0..MAX_LINE_SEARCH {
        let width = hi.step - lo.step;
        // Quadratic interpolation from lo's value/slope and hi's value,
        // safeguarded to the interior of the bracket.
        let mut step = f64::NAN;
        if hi.value.is_finite() && lo.slope.is_finite() {
            let denom = 2.0 * (hi.value - lo.value - lo.slope * width);
            if denom.abs() > 0.0 {
                step = lo.step - lo.slope * width * width / denom;
            }
        }
        let (a, b) = if lo.step < hi.step {
            (lo.step, hi.step)
        } else {
            (hi.step, lo.step)
        };
        let margin = 0.1 * (b - a);
        if !step.is_finite() || step < a + margin || step > b - margin {
            step = 0.5 * (a + b);
        }
        if (b - a).abs() < 1e-16 * b.abs().max(1.0) {
            break;
        }
        let cur = probe(obj, x, dir, step);
        if cur.value <= f0 + VALUE_NOISE * f0.abs().max(1.0) && cur.slope.abs() <= -C2 * slope0 {
            return Some(cur);
        }
        if cur.value > f0 + C1 * step * slope0 || cur.value >= lo.value {
            hi = cur;
        } else {
            if cur.slope.abs() <= -C2 * slope0 {
                return Some(cur);
            }
            if cur.slope * (hi.step - lo.step) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    (lo.step > 0.0).then_some(lo)
}

/// Minimizes `obj` starting from `x0`.
pub fn minimize<O: Objective>(obj: &O, x0: Vec<f64>, config: &LbfgsConfig) -> Minimum {
    let n = obj.dim();
    assert_eq!(x0.len(), n, "starting point has wrong dimension");
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut value = obj.eval(&x, &mut grad);
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(config.memory);
    let mut iterations = 0;
    let mut converged = inf_norm(&grad) < config.gradient_tolerance;

    while !converged && iterations < config.max_iterations {
        iterations += 1;
        let mut dir = two_loop(&grad, &history);
        let mut slope = dot(&grad, &dir);
        if !(slope < 0.0) {
            history.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &dir);
        }
        let initial_step = if history.is_empty() {
            (1.0 / dot(&grad, &grad).sqrt()).min(1.0)
        } else {
            1.0
        };
        let found = match line_search(obj, &x, value, slope, &dir, initial_step) {
            Some(p) => Some((p, dir)),
            None if !history.is_empty() => {
                // Stale curvature pairs; restart from steepest descent.
                history.clear();
                let dir: Vec<f64> = grad.iter().map(|g| -g).collect();
                let slope = dot(&grad, &dir);
                let step = (1.0 / slope.abs().sqrt()).min(1.0);
                line_search(obj, &x, value, slope, &dir, step).map(|p| (p, dir))
            }
            None => None,
        };
        let Some((accepted, dir)) = found else {
            break;
        };
        let s: Vec<f64> = dir.iter().map(|d| accepted.step * d).collect();
        let y: Vec<f64> = accepted.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        value = accepted.value;
        grad = accepted.grad;
        if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back(Pair { s, y, rho: 1.0 / sy });
        }
        converged = inf_norm(&grad) < config.gradient_tolerance;
    }

    Minimum {
        gradient_norm: inf_norm(&grad),
        x,
        value,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }

        fn eval(&self, x: &[f64], g: &mut [f64]) -> f64 {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        }
    }

    struct Quadratic(Vec<f64>);

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.0.len()
        }

        fn eval(&self, x: &[f64], g: &mut [f64]) -> f64 {
            let mut f = 0.0;
            for (i, (xi, ci)) in x.iter().zip(&self.0).enumerate() {
                let scale = (i + 1) as f64;
                g[i] = scale * (xi - ci);
                f += 0.5 * scale * (xi - ci).powi(2);
            }
            f
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let m = minimize(&Rosenbrock, vec![-1.2, 1.0], &LbfgsConfig::default());
        assert!(m.converged, "{m:?}");
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn solves_ill_conditioned_quadratic() {
        let target: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let m = minimize(&Quadratic(target.clone()), vec![0.0; 50], &LbfgsConfig::default());
        assert!(m.converged);
        for (a, b) in m.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn respects_iteration_cap() {
        let cfg = LbfgsConfig {
            max_iterations: 2,
            ..LbfgsConfig::default()
        };
        let m = minimize(&Rosenbrock, vec![-1.2, 1.0], &cfg);
        assert!(!m.converged);
        assert_eq!(m.iterations, 2);
    }
}
