//! Classification metrics and result-table rows.
//!
//! `f1_unweighted_mean` is the arithmetic mean of per-class F1 over the
//! classes present in the true labels; tables print it as `F1mic`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::Label;

/// All rates are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub f1_weighted: f64,
    pub f1_unweighted_mean: f64,
    /// Recall of each class present in the true labels.
    pub per_class_accuracy: BTreeMap<Label, f64>,
    /// True-label count of each class.
    pub class_counts: BTreeMap<Label, usize>,
}

/// 3x3 confusion counts, `[true][predicted]` by [`Label::index`].
pub fn confusion_matrix(y_true: &[Label], y_pred: &[Label]) -> [[usize; 3]; 3] {
    let mut m = [[0; 3]; 3];
    for (t, p) in y_true.iter().zip(y_pred) {
        m[t.index()][p.index()] += 1;
    }
    m
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn evaluate(y_true: &[Label], y_pred: &[Label]) -> Result<EvaluationReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let m = confusion_matrix(y_true, y_pred);
    let n = y_true.len();
    let correct: usize = (0..3).map(|k| m[k][k]).sum();

    let mut report = EvaluationReport {
        accuracy: 100.0 * ratio(correct, n),
        precision_weighted: 0.0,
        recall_weighted: 0.0,
        f1_weighted: 0.0,
        f1_unweighted_mean: 0.0,
        per_class_accuracy: BTreeMap::new(),
        class_counts: BTreeMap::new(),
    };
    let mut f1_sum = 0.0;
    let mut present = 0;
    for k in 0..3 {
        let support: usize = m[k].iter().sum();
        if support == 0 {
            continue;
        }
        let predicted: usize = (0..3).map(|t| m[t][k]).sum();
        let precision = ratio(m[k][k], predicted);
        let recall = ratio(m[k][k], support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let w = ratio(support, n);
        report.precision_weighted += 100.0 * w * precision;
        report.recall_weighted += 100.0 * w * recall;
        report.f1_weighted += 100.0 * w * f1;
        f1_sum += f1;
        present += 1;
        let label = Label::from_index(k);
        report.per_class_accuracy.insert(label, 100.0 * recall);
        report.class_counts.insert(label, support);
    }
    report.f1_unweighted_mean = 100.0 * f1_sum / present as f64;
    Ok(report)
}

/// Column header of a result-table row.
pub const TABLE_HEADER: &str = "Accuracy,Prec.,Recall,F1w,F1mic,Acc0,Acc+1,Acc-1";

impl EvaluationReport {
    /// Comma-separated row in [`TABLE_HEADER`] order, two decimals; classes
    /// absent from the true labels leave their accuracy cell empty.
    pub fn table_row(&self) -> String {
        let acc = |l: Label| {
            self.per_class_accuracy
                .get(&l)
                .map(|v| format!("{v:.2}"))
                .unwrap_or_default()
        };
        format!(
            "{:.2},{:.2},{:.2},{:.2},{:.2},{},{},{}",
            self.accuracy,
            self.precision_weighted,
            self.recall_weighted,
            self.f1_weighted,
            self.f1_unweighted_mean,
            acc(Label::Flat),
            acc(Label::Up),
            acc(Label::Down)
        )
    }

    pub fn count(&self, label: Label) -> usize {
        self.class_counts.get(&label).copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn labels(v: &[i8]) -> Vec<Label> {
        v.iter().map(|&x| Label::from_value(x).unwrap()).collect()
    }

    #[test]
    fn perfect_prediction() {
        let y = labels(&[0, 1, -1, 0, 1]);
        let r = evaluate(&y, &y).unwrap();
        for v in [r.accuracy, r.precision_weighted, r.recall_weighted, r.f1_weighted, r.f1_unweighted_mean] {
            assert_abs_diff_eq!(v, 100.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn all_flat_predictions() {
        // hand-computed: Flat P = 2/4, R = 1, F1 = 2/3; Up/Down F1 = 0
        let r = evaluate(&labels(&[0, 0, 1, -1]), &labels(&[0, 0, 0, 0])).unwrap();
        assert_abs_diff_eq!(r.accuracy, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.per_class_accuracy[&Label::Flat], 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.per_class_accuracy[&Label::Up], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.per_class_accuracy[&Label::Down], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.f1_unweighted_mean, 200.0 / 9.0, epsilon = 1e-9);
        assert_eq!(r.table_row(), "50.00,25.00,50.00,33.33,22.22,100.00,0.00,0.00");
    }

    #[test]
    fn absent_class_excluded_from_mean() {
        let r = evaluate(&labels(&[1, 1, -1, -1]), &labels(&[1, 0, -1, -1])).unwrap();
        assert!(!r.per_class_accuracy.contains_key(&Label::Flat));
        // Up: P=1, R=.5, F1=2/3; Down: P=1, R=1, F1=1
        assert_abs_diff_eq!(r.f1_unweighted_mean, 100.0 * (2.0 / 3.0 + 1.0) / 2.0, epsilon = 1e-9);
        assert!(r.table_row().contains(",,"));
    }

    #[test]
    fn errors() {
        assert!(matches!(evaluate(&[], &[]), Err(Error::Empty(_))));
        assert!(matches!(evaluate(&labels(&[0]), &labels(&[0, 1])), Err(Error::LengthMismatch(1, 2))));
    }

    fn arb_pairs() -> impl Strategy<Value = (Vec<Label>, Vec<Label>)> {
        prop::collection::vec((0usize..3, 0usize..3), 1..200).prop_map(|v| {
            v.into_iter().map(|(a, b)| (Label::from_index(a), Label::from_index(b))).unzip()
        })
    }

    proptest! {
        #[test]
        fn rates_bounded_and_accuracy_decomposes((t, p) in arb_pairs()) {
            let r = evaluate(&t, &p).unwrap();
            for v in [r.accuracy, r.precision_weighted, r.recall_weighted, r.f1_weighted, r.f1_unweighted_mean] {
                prop_assert!((0.0..=100.0 + 1e-9).contains(&v));
            }
            let n = t.len() as f64;
            let recomposed: f64 = r.per_class_accuracy.iter().map(|(l, a)| a * r.class_counts[l] as f64 / n).sum();
            prop_assert!((recomposed - r.accuracy).abs() < 1e-9);
            prop_assert!((r.recall_weighted - r.accuracy).abs() < 1e-9);
        }

        #[test]
        fn joint_permutation_invariant((t, p) in arb_pairs(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut idx: Vec<usize> = (0..t.len()).collect();
            idx.shuffle(&mut crate::rng::substream(seed, "perm"));
            let t2: Vec<Label> = idx.iter().map(|&i| t[i]).collect();
            let p2: Vec<Label> = idx.iter().map(|&i| p[i]).collect();
            let a = evaluate(&t, &p).unwrap();
            let b = evaluate(&t2, &p2).unwrap();
            prop_assert!((a.accuracy - b.accuracy).abs() < 1e-9);
            prop_assert!((a.f1_weighted - b.f1_weighted).abs() < 1e-9);
            prop_assert!((a.f1_unweighted_mean - b.f1_unweighted_mean).abs() < 1e-9);
        }

        #[test]
        fn relabeling_bijection((t, p) in arb_pairs(), perm in Just([2usize, 0, 1]).prop_union(Just([1, 2, 0])).or(Just([0, 2, 1]))) {
            let map = |l: &Label| Label::from_index(perm[l.index()]);
            let t2: Vec<Label> = t.iter().map(map).collect();
            let p2: Vec<Label> = p.iter().map(map).collect();
            let a = evaluate(&t, &p).unwrap();
            let b = evaluate(&t2, &p2).unwrap();
            prop_assert!((a.accuracy - b.accuracy).abs() < 1e-9);
            prop_assert!((a.f1_unweighted_mean - b.f1_unweighted_mean).abs() < 1e-9);
            for (l, acc) in &a.per_class_accuracy {
                prop_assert!((b.per_class_accuracy[&map(l)] - acc).abs() < 1e-9);
            }
        }
    }
}
