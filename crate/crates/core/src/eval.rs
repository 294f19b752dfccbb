//! Classifier evaluation: confusion matrix, accuracy and per-class /
//! macro-averaged precision, recall and F-score.

use std::fmt;

use crate::data::{Dataset, Label, CLASS_COUNT};
use crate::error::Result;
use crate::forest::ForestModel;
use crate::scalar::Scalar;

/// 2x2 confusion counts: rows are the true class, columns the predicted
/// class, both in `[benign, malicious]` order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; CLASS_COUNT]; CLASS_COUNT],
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut counts = [[0u64; CLASS_COUNT]; CLASS_COUNT];
        for (truth, predicted) in pairs {
            counts[truth.index()][predicted.index()] += 1;
        }
        ConfusionMatrix { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..CLASS_COUNT).map(|c| self.counts[c][c]).sum();
        correct as f64 / self.total() as f64
    }
}

/// Precision, recall and F-score of one class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// Full evaluation report. Macro values are unweighted means over the two
/// classes.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class: [ClassMetrics; CLASS_COUNT],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f_score: f64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Derives all metrics from a confusion matrix. Zero-denominator cases
/// (no predictions or no instances of a class) score 0.
pub fn report_from_confusion(confusion: ConfusionMatrix) -> EvalReport {
    let per_class = std::array::from_fn(|c| {
        let tp = confusion.counts[c][c];
        let predicted: u64 = (0..CLASS_COUNT).map(|r| confusion.counts[r][c]).sum();
        let actual: u64 = confusion.counts[c].iter().sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, actual);
        let f_score = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassMetrics { precision, recall, f_score }
    });
    let per_class: [ClassMetrics; CLASS_COUNT] = per_class;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / CLASS_COUNT as f64;
    EvalReport {
        accuracy: confusion.accuracy(),
        per_class,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f_score: mean(|m| m.f_score),
        confusion,
    }
}

/// Macro F-score of predictions against truth; the GA fitness metric.
pub fn macro_f_score(truth: &[Label], predicted: &[Label]) -> f64 {
    let confusion =
        ConfusionMatrix::from_pairs(truth.iter().copied().zip(predicted.iter().copied()));
    report_from_confusion(confusion).macro_f_score
}

/// Scores a labeled raw dataset with a model and reports all metrics.
pub fn evaluate<T: Scalar>(model: &ForestModel<T>, dataset: &Dataset<T>) -> Result<EvalReport> {
    let truth = dataset.labels_required()?;
    let predictions = model.predict_dataset(dataset)?;
    let confusion = ConfusionMatrix::from_pairs(
        truth.iter().copied().zip(predictions.iter().map(|(label, _)| *label)),
    );
    Ok(report_from_confusion(confusion))
}

impl EvalReport {
    /// Machine-readable CSV rendering: `metric,class,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,class,value\n");
        out.push_str(&format!("accuracy,,{}\n", self.accuracy));
        for (c, m) in self.per_class.iter().enumerate() {
            let class = Label::from_index(c);
            out.push_str(&format!("precision,{class},{}\n", m.precision));
            out.push_str(&format!("recall,{class},{}\n", m.recall));
            out.push_str(&format!("f_score,{class},{}\n", m.f_score));
        }
        out.push_str(&format!("precision,macro,{}\n", self.macro_precision));
        out.push_str(&format!("recall,macro,{}\n", self.macro_recall));
        out.push_str(&format!("f_score,macro,{}\n", self.macro_f_score));
        for truth in 0..CLASS_COUNT {
            for pred in 0..CLASS_COUNT {
                out.push_str(&format!(
                    "confusion,{}->{},{}\n",
                    Label::from_index(truth),
                    Label::from_index(pred),
                    self.confusion.counts[truth][pred]
                ));
            }
        }
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy: {:.4}", self.accuracy)?;
        writeln!(f, "{:<12} {:>9} {:>9} {:>9}", "class", "precision", "recall", "f-score")?;
        for (c, m) in self.per_class.iter().enumerate() {
            writeln!(
                f,
                "{:<12} {:>9.4} {:>9.4} {:>9.4}",
                Label::from_index(c).to_string(),
                m.precision,
                m.recall,
                m.f_score
            )?;
        }
        writeln!(
            f,
            "{:<12} {:>9.4} {:>9.4} {:>9.4}",
            "macro", self.macro_precision, self.macro_recall, self.macro_f_score
        )?;
        writeln!(f, "confusion (rows true, cols predicted; benign, malicious):")?;
        for row in &self.confusion.counts {
            writeln!(f, "  {:>8} {:>8}", row[0], row[1])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    use Label::{Benign as B, Malicious as M};

    #[test]
    fn metric_arithmetic_on_fixed_confusion() {
        let confusion = ConfusionMatrix { counts: [[85, 5], [5, 5]] };
        let report = report_from_confusion(confusion);
        assert_abs_diff_eq!(report.accuracy, 0.90);
        let malicious = report.per_class[M.index()];
        assert_abs_diff_eq!(malicious.precision, 0.5);
        assert_abs_diff_eq!(malicious.recall, 0.5);
        assert_abs_diff_eq!(malicious.f_score, 0.5);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let truth = [B, B, M, M, B];
        let confusion = ConfusionMatrix::from_pairs(truth.iter().copied().zip(truth));
        let report = report_from_confusion(confusion);
        assert_abs_diff_eq!(report.accuracy, 1.0);
        assert_abs_diff_eq!(report.macro_f_score, 1.0);
        assert_abs_diff_eq!(report.macro_precision, 1.0);
        assert_abs_diff_eq!(report.macro_recall, 1.0);
    }

    #[test]
    fn all_benign_predictor_hides_behind_accuracy() {
        let mut pairs = vec![(B, B); 99];
        pairs.push((M, B));
        let report = report_from_confusion(ConfusionMatrix::from_pairs(pairs));
        assert_abs_diff_eq!(report.accuracy, 0.99);
        assert_abs_diff_eq!(report.per_class[M.index()].recall, 0.0);
        assert_abs_diff_eq!(report.per_class[M.index()].f_score, 0.0);
    }

    #[test]
    fn accuracy_is_trace_over_total() {
        let confusion = ConfusionMatrix { counts: [[7, 3], [2, 8]] };
        assert_abs_diff_eq!(confusion.accuracy(), 15.0 / 20.0);
        assert_eq!(confusion.total(), 20);
    }

    #[test]
    fn recall_is_row_order_invariant() {
        let pairs = vec![(B, B), (M, B), (B, M), (M, M), (B, B)];
        let mut reversed = pairs.clone();
        reversed.reverse();
        let a = report_from_confusion(ConfusionMatrix::from_pairs(pairs));
        let b = report_from_confusion(ConfusionMatrix::from_pairs(reversed));
        assert_eq!(a, b);
    }

    #[test]
    fn macro_f_of_coin_flip_is_half() {
        let truth: Vec<Label> = (0..100).map(|i| if i % 2 == 0 { B } else { M }).collect();
        let predicted: Vec<Label> = (0..100).map(|i| if i % 4 < 2 { B } else { M }).collect();
        assert_abs_diff_eq!(macro_f_score(&truth, &predicted), 0.5);
    }
}
