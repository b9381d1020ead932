//! Three-way stance labels for opinion texts: a weighted n-gram logistic
//! regression trained in-core, plus ingestion of labels produced elsewhere.

mod eval;
mod gwsd;
mod labels;
mod linear;
mod tokenize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Leaning;
use crate::label::Stance;

pub use eval::{
    cross_validate, evaluate, majority_baseline, stratified_split, ClassMetrics, CrossValidation, Evaluation, Split,
};
pub use gwsd::{read_gwsd, GwsdData, GwsdRow};
pub use labels::{ingest_external_labels, read_labels, write_labels, IngestOutcome, LabelOrigin, RejectedRow, StanceLabel};
pub use linear::{classify, train_linear, LinearConfig, LinearModel, Penalty};
pub use tokenize::{features, tokenize, Preprocessing, STOPWORDS};

#[derive(Debug, Error)]
pub enum StanceError {
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("training data needs at least two distinct labels, found {0}")]
    SingleLabel(usize),
    #[error("line {line}: unknown stance label {value:?}")]
    UnknownLabel { line: u64, value: String },
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// One training or test item with its (possibly soft) label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub item_id: String,
    pub text: String,
    /// Indexed by [`Stance::index`].
    pub label_distribution: [f64; 3],
    #[serde(default)]
    pub leaning: Leaning,
}

impl LabeledInstance {
    pub fn one_hot(item_id: impl Into<String>, text: impl Into<String>, label: Stance) -> Self {
        let mut label_distribution = [0.0; 3];
        label_distribution[label.index()] = 1.0;
        LabeledInstance {
            item_id: item_id.into(),
            text: text.into(),
            label_distribution,
            leaning: Leaning::Unknown,
        }
    }

    pub fn validate(&self) -> Result<(), StanceError> {
        let p = &self.label_distribution;
        let sum: f64 = p.iter().sum();
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(StanceError::Invalid(format!(
                "item {:?}: label distribution {p:?} is not a probability vector",
                self.item_id
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> Stance {
        Stance::argmax(&self.label_distribution)
    }
}

/// A single (text, label) training row with its instance weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRow {
    pub text: String,
    pub label: Stance,
    pub weight: f64,
}

/// One row per label with nonzero probability, weighted by that probability.
pub fn expand_weighted(instances: &[LabeledInstance]) -> Vec<WeightedRow> {
    let mut rows = Vec::with_capacity(instances.len());
    for inst in instances {
        for s in [Stance::Agree, Stance::Neutral, Stance::Disagree] {
            let w = inst.label_distribution[s.index()];
            if w > 0.0 {
                rows.push(WeightedRow {
                    text: inst.text.clone(),
                    label: s,
                    weight: w,
                });
            }
        }
    }
    rows
}

/// Weight-one rows on the argmax labels.
pub fn hard_rows(instances: &[LabeledInstance]) -> Vec<WeightedRow> {
    instances
        .iter()
        .map(|i| WeightedRow {
            text: i.text.clone(),
            label: i.label(),
            weight: 1.0,
        })
        .collect()
}
