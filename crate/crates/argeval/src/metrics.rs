//! Classification quality measures: accuracy, macro precision/recall/F1, and
//! the six-way error taxonomy between gold and predicted labels.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

/// How records whose prediction could not be parsed are scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnparsedPolicy {
    /// Charged against accuracy and recall as misclassifications.
    #[default]
    Error,
    /// Dropped from scoring entirely.
    Drop,
}

impl FromStr for UnparsedPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "error" => Ok(UnparsedPolicy::Error),
            "drop" => Ok(UnparsedPolicy::Drop),
            _ => Err(format!("unknown unparsed policy: {s:?} (use error|drop)")),
        }
    }
}

/// Gold-by-predicted counts over the three labels, with unparsed predictions
/// tracked separately per gold class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// counts[gold][predicted], indexed in label order.
    pub counts: [[usize; 3]; 3],
    pub unparsed_per_gold: [usize; 3],
    pub unparsed_count: usize,
    /// Records scored: all pairs under the error policy, parsed pairs under
    /// the drop policy.
    pub total: usize,
    pub policy: UnparsedPolicy,
}

fn index(label: Label) -> usize {
    match label {
        Label::For => 0,
        Label::Against => 1,
        Label::NoArgument => 2,
    }
}

impl ConfusionMatrix {
    pub fn get(&self, gold: Label, predicted: Label) -> usize {
        self.counts[index(gold)][index(predicted)]
    }

    fn trace(&self) -> usize {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    /// Gold occurrences of a class, honoring the unparsed policy.
    fn gold_total(&self, label: Label) -> usize {
        let parsed: usize = self.counts[index(label)].iter().sum();
        match self.policy {
            UnparsedPolicy::Error => parsed + self.unparsed_per_gold[index(label)],
            UnparsedPolicy::Drop => parsed,
        }
    }

    /// Times a class was predicted (unparsed is never a prediction).
    fn predicted_total(&self, label: Label) -> usize {
        (0..3).map(|g| self.counts[g][index(label)]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.trace() as f64 / self.total as f64
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("golds ({golds}) and predictions ({predictions}) differ in length")]
    LengthMismatch { golds: usize, predictions: usize },
    #[error("cannot compute metrics over an empty matrix")]
    EmptyMatrix,
}

/// Builds the confusion matrix for a run of (gold, predicted) pairs.
/// `None` predictions are unparsed responses.
pub fn confusion(
    golds: &[Label],
    predictions: &[Option<Label>],
    policy: UnparsedPolicy,
) -> Result<ConfusionMatrix, MetricsError> {
    if golds.len() != predictions.len() {
        return Err(MetricsError::LengthMismatch {
            golds: golds.len(),
            predictions: predictions.len(),
        });
    }
    let mut matrix = ConfusionMatrix {
        policy,
        ..Default::default()
    };
    for (gold, prediction) in golds.iter().zip(predictions) {
        match prediction {
            Some(predicted) => {
                matrix.counts[index(*gold)][index(*predicted)] += 1;
                matrix.total += 1;
            }
            None => {
                matrix.unparsed_per_gold[index(*gold)] += 1;
                matrix.unparsed_count += 1;
                if policy == UnparsedPolicy::Error {
                    matrix.total += 1;
                }
            }
        }
    }
    Ok(matrix)
}

/// Precision, recall, and F1 for one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Accuracy plus per-class and macro-averaged precision/recall/F1.
/// Macro values are unweighted means over the classes present in gold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: BTreeMap<Label, ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Computes the report from a confusion matrix.
pub fn metrics(matrix: &ConfusionMatrix) -> Result<MetricsReport, MetricsError> {
    if matrix.total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let mut report = MetricsReport {
        accuracy: matrix.accuracy(),
        ..Default::default()
    };
    let mut present = 0usize;
    for label in Label::ALL {
        let gold_total = matrix.gold_total(label);
        if gold_total == 0 {
            continue;
        }
        let hit = matrix.get(label, label);
        let precision = ratio(hit, matrix.predicted_total(label));
        let recall = ratio(hit, gold_total);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        report.per_class.insert(
            label,
            ClassMetrics {
                precision,
                recall,
                f1,
            },
        );
        report.macro_precision += precision;
        report.macro_recall += recall;
        report.macro_f1 += f1;
        present += 1;
    }
    if present > 0 {
        report.macro_precision /= present as f64;
        report.macro_recall /= present as f64;
        report.macro_f1 /= present as f64;
    }
    Ok(report)
}

/// Misclassification direction: first letter is the gold class, second the
/// predicted class (A = against, F = for, N = neutral).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorType {
    AF,
    AN,
    FA,
    FN,
    NA,
    NF,
}

impl ErrorType {
    pub const ALL: [ErrorType; 6] = [
        ErrorType::AF,
        ErrorType::AN,
        ErrorType::FA,
        ErrorType::FN,
        ErrorType::NA,
        ErrorType::NF,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorType::AF => "AF",
            ErrorType::AN => "AN",
            ErrorType::FA => "FA",
            ErrorType::FN => "FN",
            ErrorType::NA => "NA",
            ErrorType::NF => "NF",
        }
    }

    /// Classifies one misclassified pair; equal labels yield `None`.
    pub fn from_pair(gold: Label, predicted: Label) -> Option<ErrorType> {
        match (gold, predicted) {
            (Label::Against, Label::For) => Some(ErrorType::AF),
            (Label::Against, Label::NoArgument) => Some(ErrorType::AN),
            (Label::For, Label::Against) => Some(ErrorType::FA),
            (Label::For, Label::NoArgument) => Some(ErrorType::FN),
            (Label::NoArgument, Label::Against) => Some(ErrorType::NA),
            (Label::NoArgument, Label::For) => Some(ErrorType::NF),
            _ => None,
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Counts of each misclassification direction over a run. Unparsed
/// predictions are excluded; an all-correct run yields an empty breakdown.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub counts: BTreeMap<ErrorType, usize>,
    pub total_errors: usize,
}

impl ErrorBreakdown {
    pub fn is_empty(&self) -> bool {
        self.total_errors == 0
    }

    /// Share of each error type among all errors; sums to 1 when any error
    /// exists.
    pub fn proportions(&self) -> BTreeMap<ErrorType, f64> {
        self.counts
            .iter()
            .map(|(t, c)| (*t, *c as f64 / self.total_errors as f64))
            .collect()
    }

    pub fn proportion(&self, error_type: ErrorType) -> f64 {
        if self.total_errors == 0 {
            return 0.0;
        }
        self.counts.get(&error_type).copied().unwrap_or(0) as f64 / self.total_errors as f64
    }

    pub fn observe(&mut self, gold: Label, predicted: Label) {
        if let Some(error_type) = ErrorType::from_pair(gold, predicted) {
            *self.counts.entry(error_type).or_insert(0) += 1;
            self.total_errors += 1;
        }
    }
}

/// Maps every misclassified (gold, predicted) pair to its error type.
pub fn error_breakdown(
    golds: &[Label],
    predictions: &[Option<Label>],
) -> Result<ErrorBreakdown, MetricsError> {
    if golds.len() != predictions.len() {
        return Err(MetricsError::LengthMismatch {
            golds: golds.len(),
            predictions: predictions.len(),
        });
    }
    let mut breakdown = ErrorBreakdown::default();
    for (gold, prediction) in golds.iter().zip(predictions) {
        if let Some(predicted) = prediction {
            breakdown.observe(*gold, *predicted);
        }
    }
    Ok(breakdown)
}
