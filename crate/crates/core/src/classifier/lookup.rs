use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::data::LabeledDataset;

/// Resolution of equal label counts at a duplicated training point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    LowestClass,
    HighestClass,
}

/// Memorizes the training set: predicts the modal training label at any
/// feature vector seen in training and `default` elsewhere.
#[derive(Debug, Clone)]
pub struct LookupClassifier {
    k: usize,
    dim: usize,
    default: usize,
    tie_break: TieBreak,
    table: BTreeMap<Vec<u64>, Vec<usize>>,
}

fn key(x: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 compare equal, so they must share a key.
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

pub fn lookup_classifier(train: &LabeledDataset, tie_break: TieBreak, default: usize) -> LookupClassifier {
    let mut table: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
    for (x, &y) in train.rows().zip(train.labels()) {
        table.entry(key(x)).or_insert_with(|| vec![0; train.k()])[y] += 1;
    }
    LookupClassifier {
        k: train.k(),
        dim: train.dim(),
        default,
        tie_break,
        table,
    }
}

impl LookupClassifier {
    /// Label counts at `x`, if it was seen in training.
    pub fn counts(&self, x: &[f64]) -> Option<&[usize]> {
        self.table.get(&key(x)).map(Vec::as_slice)
    }

    pub fn num_seen_points(&self) -> usize {
        self.table.len()
    }
}

impl Classifier for LookupClassifier {
    fn num_classes(&self) -> usize {
        self.k
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.k];
        s[self.predict(x)] = 1.0;
        s
    }

    fn predict(&self, x: &[f64]) -> usize {
        let Some(counts) = self.table.get(&key(x)) else {
            return self.default;
        };
        let top = counts.iter().copied().max().unwrap_or(0);
        let mut tied = counts.iter().enumerate().filter(|(_, &c)| c == top).map(|(i, _)| i);
        match self.tie_break {
            TieBreak::LowestClass => tied.next().unwrap_or(self.default),
            TieBreak::HighestClass => tied.next_back().unwrap_or(self.default),
        }
    }
}
