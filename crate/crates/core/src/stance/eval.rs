use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::{train_linear, LinearConfig};
use super::{expand_weighted, LabeledInstance, StanceError};
use crate::corpus::Leaning;
use crate::label::Stance;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn strata(instances: &[LabeledInstance]) -> BTreeMap<(Stance, Leaning), Vec<usize>> {
    let mut out: BTreeMap<(Stance, Leaning), Vec<usize>> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        out.entry((inst.label(), inst.leaning)).or_default().push(i);
    }
    out
}

/// Proportional allocation of `total` over group sizes; leftover units go
/// to the largest fractional parts, earlier groups first on ties.
pub(crate) fn largest_remainder(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return vec![0; sizes.len()];
    }
    let mut quota: Vec<usize> = sizes.iter().map(|&s| s * total / n).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // Remainders compared exactly as (s * total) mod n.
    order.sort_by_key(|&i| std::cmp::Reverse(sizes[i] * total % n));
    let left = total - quota.iter().sum::<usize>();
    for &i in order.iter().take(left) {
        quota[i] += 1;
    }
    quota
}

/// Test set of `test_size` instances stratified by (argmax label, leaning).
pub fn stratified_split(instances: &[LabeledInstance], test_size: usize, seed: u64) -> Result<Split, StanceError> {
    if test_size > instances.len() {
        return Err(StanceError::Invalid(format!(
            "test size {test_size} exceeds the {} available instances",
            instances.len()
        )));
    }
    let groups = strata(instances);
    let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    let quota = largest_remainder(&sizes, test_size);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::with_capacity(test_size);
    for (members, q) in groups.values().zip(quota) {
        let mut m = members.clone();
        m.shuffle(&mut rng);
        test.extend_from_slice(&m[..q]);
    }
    test.sort_unstable();
    let mut in_test = vec![false; instances.len()];
    for &i in &test {
        in_test[i] = true;
    }
    let train = (0..instances.len()).filter(|&i| !in_test[i]).collect();
    Ok(Split { train, test })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n: usize,
    pub accuracy: f64,
    /// Indexed by [`Stance::index`].
    pub per_class: [ClassMetrics; 3],
    pub macro_f1: f64,
    /// `confusion[gold][predicted]`.
    pub confusion: [[usize; 3]; 3],
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy and per-class scores; undefined precision or recall counts as 0.
pub fn evaluate(gold: &[Stance], predicted: &[Stance]) -> Evaluation {
    assert_eq!(gold.len(), predicted.len(), "gold and predicted lengths differ");
    let mut confusion = [[0usize; 3]; 3];
    for (g, p) in gold.iter().zip(predicted) {
        confusion[g.index()][p.index()] += 1;
    }
    let mut per_class = [ClassMetrics::default(); 3];
    for (k, m) in per_class.iter_mut().enumerate() {
        let tp = confusion[k][k];
        let support: usize = confusion[k].iter().sum();
        let predicted_k: usize = (0..3).map(|g| confusion[g][k]).sum();
        m.precision = ratio(tp, predicted_k);
        m.recall = ratio(tp, support);
        m.f1 = if m.precision + m.recall > 0.0 {
            2.0 * m.precision * m.recall / (m.precision + m.recall)
        } else {
            0.0
        };
        m.support = support;
    }
    let correct: usize = (0..3).map(|k| confusion[k][k]).sum();
    Evaluation {
        n: gold.len(),
        accuracy: ratio(correct, gold.len()),
        macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / 3.0,
        per_class,
        confusion,
    }
}

/// Most frequent training label; ties go to agree, then neutral.
pub fn majority_baseline(train: &[Stance]) -> Stance {
    let mut counts = [0.0; 3];
    for s in train {
        counts[s.index()] += 1.0;
    }
    Stance::argmax(&counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub folds: Vec<Evaluation>,
    pub mean_accuracy: f64,
    pub mean_macro_f1: f64,
}

/// K-fold cross-validation with folds stratified like the test split.
/// Training uses the label-weighted rows; scoring uses argmax labels.
pub fn cross_validate(
    instances: &[LabeledInstance],
    config: &LinearConfig,
    k: usize,
    seed: u64,
) -> Result<CrossValidation, StanceError> {
    if k < 2 || k > instances.len() {
        return Err(StanceError::Invalid(format!("cannot make {k} folds from {} instances", instances.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; instances.len()];
    let mut next = 0;
    for members in strata(instances).values() {
        let mut m = members.clone();
        m.shuffle(&mut rng);
        for i in m {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (inst, &g) in instances.iter().zip(&fold_of) {
            if g == f {
                test.push(inst);
            } else {
                train.push(inst.clone());
            }
        }
        let model = train_linear(&expand_weighted(&train), config)?;
        let gold: Vec<Stance> = test.iter().map(|i| i.label()).collect();
        let predicted: Vec<Stance> = test.iter().map(|i| model.predict(&i.text)).collect();
        folds.push(evaluate(&gold, &predicted));
    }
    let mean = |f: fn(&Evaluation) -> f64| folds.iter().map(f).sum::<f64>() / k as f64;
    Ok(CrossValidation {
        mean_accuracy: mean(|e| e.accuracy),
        mean_macro_f1: mean(|e| e.macro_f1),
        folds,
    })
}
