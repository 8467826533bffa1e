//! Classifiers and their evaluation.

mod lookup;
mod mlp;
mod train;

pub use lookup::{lookup_classifier, LookupClassifier, TieBreak};
pub use mlp::{Gradients, MlpParams};
pub use train::{train_mlp, train_mlp_observed, BatchMode, CheckpointRecord, TrainConfig, Trainer};

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::noise::ROW_SUM_TOL;

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub trait Classifier {
    fn num_classes(&self) -> usize;

    /// Expected feature dimension, when the classifier has a fixed one.
    fn input_dim(&self) -> Option<usize> {
        None
    }

    fn predict_scores(&self, x: &[f64]) -> Vec<f64>;

    fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.predict_scores(x))
    }

    fn predict_all(&self, ds: &LabeledDataset) -> Vec<usize> {
        ds.rows().map(|x| self.predict(x)).collect()
    }
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn input_dim(&self) -> Option<usize> {
        (**self).input_dim()
    }
    fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        (**self).predict_scores(x)
    }
    fn predict(&self, x: &[f64]) -> usize {
        (**self).predict(x)
    }
    fn predict_all(&self, ds: &LabeledDataset) -> Vec<usize> {
        (**self).predict_all(ds)
    }
}

/// Always predicts the same class.
#[derive(Debug, Clone, Copy)]
pub struct ConstantClassifier {
    pub class: usize,
    pub k: usize,
}

impl Classifier for ConstantClassifier {
    fn num_classes(&self) -> usize {
        self.k
    }

    fn predict_scores(&self, _x: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.k];
        s[self.class] = 1.0;
        s
    }
}

pub(crate) fn check_dim<C: Classifier + ?Sized>(h: &C, ds: &LabeledDataset) -> Result<()> {
    match h.input_dim() {
        Some(d) if d != ds.dim() => Err(Error::invalid(format!(
            "classifier expects {d} features, dataset has {}",
            ds.dim()
        ))),
        _ => Ok(()),
    }
}

/// Fraction of samples with `h(x_i) = y_i`.
pub fn accuracy<C: Classifier + ?Sized>(h: &C, ds: &LabeledDataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::invalid("accuracy of an empty dataset is undefined"));
    }
    check_dim(h, ds)?;
    Ok(accuracy_of(&h.predict_all(ds), ds.labels()))
}

pub(crate) fn accuracy_of(pred: &[usize], labels: &[usize]) -> f64 {
    let hits = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len() as f64
}

/// `rows[i][j] = Pr[h(X) = j | Y = i]`. Rows of classes with no support
/// are all zero and flagged in `present`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    rows: Vec<Vec<f64>>,
    present: Vec<bool>,
}

impl ConfusionMatrix {
    /// A fully defined confusion matrix; every row must be a probability vector.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(Error::invalid(format!(
                    "confusion row {i} has {} entries, expected {k}",
                    r.len()
                )));
            }
            if r.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(format!("confusion row {i} has an entry outside [0, 1]")));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("confusion row {i} sums to {s}")));
            }
        }
        Ok(Self {
            k,
            rows,
            present: vec![true; k],
        })
    }

    pub fn identity(k: usize) -> Self {
        Self::from_rows(
            (0..k)
                .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
        .expect("identity is valid")
    }

    /// Row-normalized counts of `(true, predicted)` pairs.
    pub fn from_predictions(k: usize, truth: &[usize], pred: &[usize]) -> Self {
        let mut counts = vec![vec![0usize; k]; k];
        for (&y, &p) in truth.iter().zip(pred) {
            counts[y][p] += 1;
        }
        Self::from_counts(counts)
    }

    pub(crate) fn from_weights(weights: Vec<Vec<f64>>) -> Self {
        let k = weights.len();
        let mut present = vec![false; k];
        let rows = weights
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                let total: f64 = w.iter().sum();
                if total > 0.0 {
                    present[i] = true;
                    w.into_iter().map(|c| c / total).collect()
                } else {
                    vec![0.0; k]
                }
            })
            .collect();
        Self { k, rows, present }
    }

    fn from_counts(counts: Vec<Vec<usize>>) -> Self {
        Self::from_weights(
            counts
                .into_iter()
                .map(|r| r.into_iter().map(|c| c as f64).collect())
                .collect(),
        )
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn is_present(&self, class: usize) -> bool {
        self.present[class]
    }

    pub fn is_complete(&self) -> bool {
        self.present.iter().all(|&p| p)
    }

    /// Largest entrywise absolute difference from `other`.
    pub fn max_abs_diff(&self, other: &[Vec<f64>]) -> f64 {
        self.rows
            .iter()
            .flatten()
            .zip(other.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Empirical confusion of `h` against the labels carried by `ds`.
pub fn confusion<C: Classifier + ?Sized>(h: &C, ds: &LabeledDataset) -> Result<ConfusionMatrix> {
    check_dim(h, ds)?;
    let pred = h.predict_all(ds);
    if let Some(&p) = pred.iter().find(|&&p| p >= ds.k()) {
        return Err(Error::invalid(format!(
            "prediction {p} out of range for k = {}",
            ds.k()
        )));
    }
    Ok(ConfusionMatrix::from_predictions(ds.k(), ds.labels(), &pred))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_class_set() -> LabeledDataset {
        LabeledDataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]], vec![0, 1, 0, 1], 2).unwrap()
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
        assert_eq!(argmax(&[-3.0, -1.0, -2.0]), 1);
    }

    #[test]
    fn constant_classifier_metrics() {
        let ds = two_class_set();
        let h = ConstantClassifier { class: 0, k: 2 };
        assert_eq!(accuracy(&h, &ds).unwrap(), 0.5);
        let c = confusion(&h, &ds).unwrap();
        assert_eq!(c.rows(), &[vec![1.0, 0.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn empty_and_absent_classes() {
        let empty = LabeledDataset::new(1, vec![], vec![], 2).unwrap();
        let h = ConstantClassifier { class: 1, k: 2 };
        assert!(accuracy(&h, &empty).is_err());
        let only_zero = LabeledDataset::from_rows(&[vec![0.0]], vec![0], 3).unwrap();
        let c = confusion(&h, &only_zero).unwrap();
        assert!(c.is_present(0) && !c.is_present(1) && !c.is_present(2));
        assert!(!c.is_complete());
        assert_eq!(c.rows()[1], vec![0.0; 3]);
    }

    #[test]
    fn from_rows_validates() {
        assert!(ConfusionMatrix::from_rows(vec![vec![0.5, 0.6], vec![0.0, 1.0]]).is_err());
        assert!(ConfusionMatrix::from_rows(vec![vec![1.0], vec![0.0, 1.0]]).is_err());
    }

    proptest! {
        #[test]
        fn confusion_rows_and_accuracy_agree(
            truth in proptest::collection::vec(0usize..3, 1..200),
            seed in any::<u64>(),
        ) {
            let pred: Vec<usize> = truth.iter().enumerate()
                .map(|(i, &y)| ((seed >> (i % 60)) as usize + y) % 3).collect();
            let c = ConfusionMatrix::from_predictions(3, &truth, &pred);
            let n = truth.len() as f64;
            let mut freq = [0.0; 3];
            for &y in &truth { freq[y] += 1.0 / n; }
            for i in 0..3 {
                if c.is_present(i) {
                    prop_assert!((c.rows()[i].iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
            let acc = accuracy_of(&pred, &truth);
            let via_conf: f64 = (0..3).map(|i| freq[i] * c.get(i, i)).sum();
            prop_assert!((acc - via_conf).abs() < 1e-12);
        }

        #[test]
        fn accuracy_is_permutation_invariant(
            labels in proptest::collection::vec(0usize..2, 1..60),
            rot in 0usize..60,
        ) {
            let n = labels.len();
            let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![(i % 7) as f64]).collect();
            let ds = LabeledDataset::from_rows(&rows, labels.clone(), 2).unwrap();
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
            let h = lookup_classifier(&ds, TieBreak::LowestClass, 1);
            prop_assert_eq!(accuracy(&h, &ds).unwrap(), accuracy(&h, &ds.subset(&perm)).unwrap());
        }
    }
}
