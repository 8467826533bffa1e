//! Exact ground truth on finite worlds.
//!
//! A deterministic classifier on a [`DiscreteDistribution`] is just one class
//! per support point, so its clean and noisy accuracies are finite sums and
//! the whole hypothesis space (`k^|support|` assignments) can be searched.

use serde::{Deserialize, Serialize};

use crate::classifier::{Classifier, ConfusionMatrix};
use crate::data::{DiscreteDistribution, LabeledDataset};
use crate::error::{Error, Result};
use crate::noise::{check_k, TransitionMatrix};

/// Largest hypothesis space [`enumerate_best`] will search.
pub const MAX_ASSIGNMENTS: u64 = 10_000_000;

/// Objective values closer than this count as ties.
pub const TIE_TOL: f64 = 1e-12;

/// Compensated (Neumaier) summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// One class per support point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscreteClassifier {
    assignment: Vec<usize>,
    k: usize,
}

impl DiscreteClassifier {
    pub fn new(assignment: Vec<usize>, k: usize) -> Self {
        Self { assignment, k }
    }

    /// Evaluates `h` at every support point of `d`.
    pub fn from_classifier<C: Classifier + ?Sized>(h: &C, d: &DiscreteDistribution) -> Result<Self> {
        let assignment: Vec<usize> = d.points().iter().map(|x| h.predict(x)).collect();
        let c = Self::new(assignment, h.num_classes());
        c.check(d)?;
        Ok(c)
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn check(&self, d: &DiscreteDistribution) -> Result<()> {
        if self.assignment.len() != d.len() {
            return Err(Error::invalid(format!(
                "assignment covers {} points, world has {}",
                self.assignment.len(),
                d.len()
            )));
        }
        check_k(self.k, d.k(), "discrete classifier")?;
        if let Some(&c) = self.assignment.iter().find(|&&c| c >= self.k) {
            return Err(Error::invalid(format!("assigned class {c} out of range")));
        }
        Ok(())
    }

    /// A [`Classifier`] over feature vectors: support points get their
    /// assigned class, anything else class 0.
    pub fn bind<'a>(&'a self, d: &'a DiscreteDistribution) -> BoundClassifier<'a> {
        BoundClassifier { h: self, d }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundClassifier<'a> {
    h: &'a DiscreteClassifier,
    d: &'a DiscreteDistribution,
}

impl Classifier for BoundClassifier<'_> {
    fn num_classes(&self) -> usize {
        self.h.k
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.d.dim())
    }

    fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.h.k];
        s[self.predict(x)] = 1.0;
        s
    }

    fn predict(&self, x: &[f64]) -> usize {
        self.d.index_of(x).map_or(0, |i| self.h.assignment[i])
    }
}

/// `Pr[h(X) = Y]` under `d`.
pub fn exact_clean_accuracy(h: &DiscreteClassifier, d: &DiscreteDistribution) -> Result<f64> {
    h.check(d)?;
    Ok(neumaier_sum(
        d.point_probs()
            .iter()
            .zip(h.assignment.iter().zip(d.true_labels()))
            .map(|(&p, (a, y))| if a == y { p } else { 0.0 }),
    ))
}

/// `Pr[h(X) = noisy Y] = sum_x p(x) * T[y(x)][h(x)]`.
pub fn exact_noisy_accuracy(h: &DiscreteClassifier, d: &DiscreteDistribution, t: &TransitionMatrix) -> Result<f64> {
    h.check(d)?;
    check_k(d.k(), t.k(), "exact_noisy_accuracy")?;
    Ok(neumaier_sum(
        d.point_probs()
            .iter()
            .zip(h.assignment.iter().zip(d.true_labels()))
            .map(|(&p, (&a, &y))| p * t.get(y, a)),
    ))
}

/// Exact `Pr[h(X) = j | Y = i]`. Every class must carry positive mass.
pub fn exact_confusion(h: &DiscreteClassifier, d: &DiscreteDistribution) -> Result<ConfusionMatrix> {
    h.check(d)?;
    let k = d.k();
    let mut mass = vec![vec![Vec::new(); k]; k];
    for ((&p, &a), &y) in d.point_probs().iter().zip(&h.assignment).zip(d.true_labels()) {
        mass[y][a].push(p);
    }
    let weights: Vec<Vec<f64>> = mass
        .into_iter()
        .map(|row| row.into_iter().map(neumaier_sum).collect())
        .collect();
    if let Some(i) = weights.iter().position(|r| r.iter().sum::<f64>() <= 0.0) {
        return Err(Error::invalid(format!("class {i} has zero probability mass")));
    }
    Ok(ConfusionMatrix::from_weights(weights))
}

/// What [`enumerate_best`] maximizes.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// Clean-distribution accuracy.
    Clean,
    /// Accuracy on the noisy distribution `(d, T)`.
    Noisy(&'a TransitionMatrix),
    /// Accuracy on a finite sample whose features are support points.
    Empirical(&'a LabeledDataset),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestAssignment {
    pub classifier: DiscreteClassifier,
    pub value: f64,
    pub unique: bool,
}

/// `score[x][c]`: objective contribution of predicting `c` at point `x`.
fn score_table(d: &DiscreteDistribution, objective: Objective<'_>) -> Result<Vec<Vec<f64>>> {
    let k = d.k();
    let rows = match objective {
        Objective::Clean => d
            .point_probs()
            .iter()
            .zip(d.true_labels())
            .map(|(&p, &y)| (0..k).map(|c| if c == y { p } else { 0.0 }).collect())
            .collect(),
        Objective::Noisy(t) => {
            check_k(k, t.k(), "noisy objective")?;
            d.point_probs()
                .iter()
                .zip(d.true_labels())
                .map(|(&p, &y)| (0..k).map(|c| p * t.get(y, c)).collect())
                .collect()
        }
        Objective::Empirical(sample) => {
            check_k(k, sample.k(), "empirical objective")?;
            if sample.is_empty() {
                return Err(Error::invalid("empirical objective needs a nonempty sample"));
            }
            let mut counts = vec![vec![0usize; k]; d.len()];
            for (x, &y) in sample.rows().zip(sample.labels()) {
                let i = d
                    .index_of(x)
                    .ok_or_else(|| Error::invalid(format!("sample point {x:?} is not in the support")))?;
                counts[i][y] += 1;
            }
            let m = sample.len() as f64;
            counts
                .into_iter()
                .map(|r| r.into_iter().map(|c| c as f64 / m).collect())
                .collect()
        }
    };
    Ok(rows)
}

/// Exhaustive search over all `k^|support|` assignments, in lexicographic
/// order (point 0 most significant). Returns the lexicographically smallest
/// maximizer and whether it is the only one (within [`TIE_TOL`]).
pub fn enumerate_best(d: &DiscreteDistribution, objective: Objective<'_>) -> Result<BestAssignment> {
    let k = d.k();
    let n = d.len();
    let size = (k as f64).powi(n as i32);
    if size > MAX_ASSIGNMENTS as f64 {
        return Err(Error::Capacity {
            size,
            limit: MAX_ASSIGNMENTS,
        });
    }
    let score = score_table(d, objective)?;

    let mut assignment = vec![0usize; n];
    let mut best = assignment.clone();
    let mut best_value = f64::NEG_INFINITY;
    let mut ties = 0usize;
    loop {
        let value = neumaier_sum(assignment.iter().enumerate().map(|(x, &c)| score[x][c]));
        if value > best_value + TIE_TOL {
            best_value = value;
            best.copy_from_slice(&assignment);
            ties = 1;
        } else if (value - best_value).abs() <= TIE_TOL {
            ties += 1;
        }
        // Odometer step, last point fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(BestAssignment {
                    classifier: DiscreteClassifier::new(best, k),
                    value: best_value,
                    unique: ties == 1,
                });
            }
            pos -= 1;
            assignment[pos] += 1;
            if assignment[pos] < k {
                break;
            }
            assignment[pos] = 0;
        }
    }
}

/// Every assignment in lexicographic order. Only for small worlds.
pub fn all_classifiers(d: &DiscreteDistribution) -> Result<Vec<DiscreteClassifier>> {
    let (k, n) = (d.k(), d.len());
    let size = (k as f64).powi(n as i32);
    if size > MAX_ASSIGNMENTS as f64 {
        return Err(Error::Capacity {
            size,
            limit: MAX_ASSIGNMENTS,
        });
    }
    let total = size as usize;
    Ok((0..total)
        .map(|mut code| {
            let mut a = vec![0; n];
            for slot in a.iter_mut().rev() {
                *slot = code % k;
                code /= k;
            }
            DiscreteClassifier::new(a, k)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tabular_world;
    use crate::noise::uniform_noise;

    fn h_star(w: &DiscreteDistribution) -> DiscreteClassifier {
        DiscreteClassifier::new(w.true_labels().to_vec(), w.k())
    }

    fn complement(w: &DiscreteDistribution) -> DiscreteClassifier {
        DiscreteClassifier::new(w.true_labels().iter().map(|y| 1 - y).collect(), 2)
    }

    #[test]
    fn exact_accuracies() {
        let w = tabular_world();
        let t = uniform_noise(2, 0.25).unwrap();
        assert_eq!(exact_clean_accuracy(&h_star(&w), &w).unwrap(), 1.0);
        assert_eq!(exact_clean_accuracy(&complement(&w), &w).unwrap(), 0.0);
        let mut six = w.true_labels().to_vec();
        six[0] = 1 - six[0];
        six[5] = 1 - six[5];
        assert_eq!(
            exact_clean_accuracy(&DiscreteClassifier::new(six.clone(), 2), &w).unwrap(),
            0.75
        );

        assert!((exact_noisy_accuracy(&h_star(&w), &w, &t).unwrap() - 0.75).abs() < 1e-15);
        assert!((exact_noisy_accuracy(&complement(&w), &w, &t).unwrap() - 0.25).abs() < 1e-15);
        let id = TransitionMatrix::identity(2).unwrap();
        let h = DiscreteClassifier::new(six, 2);
        assert_eq!(
            exact_noisy_accuracy(&h, &w, &id).unwrap(),
            exact_clean_accuracy(&h, &w).unwrap()
        );

        assert!(exact_clean_accuracy(&DiscreteClassifier::new(vec![0; 3], 2), &w).is_err());
        assert!(exact_noisy_accuracy(&h_star(&w), &w, &uniform_noise(3, 0.1).unwrap()).is_err());
    }

    #[test]
    fn exact_confusions() {
        let w = tabular_world();
        assert_eq!(exact_confusion(&h_star(&w), &w).unwrap(), ConfusionMatrix::identity(2));
        let zero = DiscreteClassifier::new(vec![0; 8], 2);
        assert_eq!(
            exact_confusion(&zero, &w).unwrap().rows(),
            &[vec![1.0, 0.0], vec![1.0, 0.0]]
        );
        let mut half = w.true_labels().to_vec();
        half[2] = 0;
        half[3] = 0;
        assert_eq!(
            exact_confusion(&DiscreteClassifier::new(half, 2), &w).unwrap().rows(),
            &[vec![1.0, 0.0], vec![0.5, 0.5]]
        );

        let one_class = DiscreteDistribution::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5], vec![0, 0], 2).unwrap();
        assert!(exact_confusion(&DiscreteClassifier::new(vec![0, 1], 2), &one_class).is_err());
    }

    #[test]
    fn enumerate_noisy_and_clean() {
        let w = tabular_world();
        let t = uniform_noise(2, 0.25).unwrap();
        let best = enumerate_best(&w, Objective::Noisy(&t)).unwrap();
        assert!((best.value - 0.75).abs() < 1e-12);
        assert_eq!(best.classifier, h_star(&w));
        assert!(best.unique);

        let best = enumerate_best(&w, Objective::Clean).unwrap();
        assert_eq!(best.value, 1.0);
        assert_eq!(best.classifier, h_star(&w));
    }

    #[test]
    fn enumerate_empirical_on_distinct_sample() {
        let w = tabular_world();
        let noisy = vec![0, 1, 0, 0, 1, 1, 0, 1];
        let sample = crate::data::LabeledDataset::from_rows(w.points(), noisy.clone(), 2).unwrap();
        let best = enumerate_best(&w, Objective::Empirical(&sample)).unwrap();
        assert_eq!(best.value, 1.0);
        assert_eq!(best.classifier.assignment(), noisy.as_slice());
        assert!(best.unique);

        // Unseen points are free: ties resolve to class 0 there.
        let partial = crate::data::LabeledDataset::from_rows(&w.points()[..2], vec![1, 1], 2).unwrap();
        let best = enumerate_best(&w, Objective::Empirical(&partial)).unwrap();
        assert_eq!(best.classifier.assignment(), &[1, 1, 0, 0, 0, 0, 0, 0]);
        assert!(!best.unique);

        let stray = crate::data::LabeledDataset::from_rows(&[vec![9.0, 9.0]], vec![0], 2).unwrap();
        assert!(enumerate_best(&w, Objective::Empirical(&stray)).is_err());
    }

    #[test]
    fn capacity_guard() {
        let n = 24;
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let d = DiscreteDistribution::new(pts, vec![1.0 / n as f64; n], vec![0; n], 2).unwrap();
        assert!(matches!(
            enumerate_best(&d, Objective::Clean),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn all_classifiers_is_lexicographic() {
        let w = tabular_world();
        let all = all_classifiers(&w).unwrap();
        assert_eq!(all.len(), 256);
        assert_eq!(all[1].assignment(), &[0, 0, 0, 0, 0, 0, 0, 1]);
        assert_eq!(all[128].assignment(), &[1, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn neumaier_beats_naive() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(v), 2.0);
    }
}
