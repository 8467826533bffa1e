//! Class-conditional label noise.
//!
//! A [`TransitionMatrix`] holds `rows[i][j] = Pr[noisy = j | true = i]`. The
//! noisy label depends on the true class only, never on the features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Categorical};

/// Tolerance on row sums of probability vectors.
pub const ROW_SUM_TOL: f64 = 1e-9;

fn check_prob_vector(v: &[f64], what: &str) -> Result<()> {
    if let Some(p) = v.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("{what}: entry {p} outside [0, 1]")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::invalid(format!("{what}: sums to {sum}, expected 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct TransitionMatrix {
    k: usize,
    rows: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawMatrix {
    k: usize,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<RawMatrix> for TransitionMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        if raw.rows.len() != raw.k {
            return Err(Error::invalid(format!(
                "k = {} but {} rows given",
                raw.k,
                raw.rows.len()
            )));
        }
        Self::new(raw.rows)
    }
}

impl TransitionMatrix {
    /// Validates a square row-stochastic matrix. Rows are never renormalized
    /// here; use [`TransitionMatrix::normalized`] for that.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {k}")));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {k}",
                    row.len()
                )));
            }
            check_prob_vector(row, &format!("row {i}"))?;
        }
        Ok(Self { k, rows })
    }

    /// Divides each row by its sum. Rows must be nonnegative with positive sum.
    pub fn normalized(mut rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in rows.iter_mut().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::invalid(format!("row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if s <= 0.0 {
                return Err(Error::invalid(format!("row {i} has zero mass")));
            }
            row.iter_mut().for_each(|p| *p /= s);
        }
        Self::new(rows)
    }

    pub fn identity(k: usize) -> Result<Self> {
        Self::new(
            (0..k)
                .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
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

    /// Strict diagonal dominance per row: `T[i][i] > T[i][j]` for all `j != i`.
    /// Compared exactly, so ties are not dominant.
    pub fn is_diagonally_dominant(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().enumerate().all(|(j, &p)| j == i || row[i] > p))
    }

    /// `min_{i, j != i} (T[i][i] - T[i][j])`. Positive iff dominant.
    pub fn min_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for (i, row) in self.rows.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if j != i {
                    margin = margin.min(row[i] - p);
                }
            }
        }
        margin
    }

    pub(crate) fn samplers(&self) -> Vec<Categorical> {
        self.rows.iter().map(|r| Categorical::new(r)).collect()
    }
}

/// `Pr[Y = i]` for each class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ClassPrior(Vec<f64>);

impl TryFrom<Vec<f64>> for ClassPrior {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ClassPrior> for Vec<f64> {
    fn from(p: ClassPrior) -> Self {
        p.0
    }
}

impl ClassPrior {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::invalid("prior needs at least 2 classes"));
        }
        check_prob_vector(&probs, "prior")?;
        Ok(Self(probs))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|&p| p > 0.0)
    }
}

pub(crate) fn check_k(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("{what}: class counts differ ({a} vs {b})")));
    }
    Ok(())
}

/// Total probability of a wrong label: `1 - sum_i prior[i] * T[i][i]`.
pub fn noise_rate(t: &TransitionMatrix, prior: &ClassPrior) -> Result<f64> {
    check_k(t.k(), prior.k(), "noise_rate")?;
    let kept: f64 = prior.probs().iter().enumerate().map(|(i, p)| p * t.get(i, i)).sum();
    Ok((1.0 - kept).clamp(0.0, 1.0))
}

pub fn is_diagonally_dominant(t: &TransitionMatrix) -> bool {
    t.is_diagonally_dominant()
}

/// Replaces each label `y` by a draw from `T[y]`, independently per sample.
pub fn corrupt_labels(labels: &[usize], t: &TransitionMatrix, seed: u64) -> Result<Vec<usize>> {
    if let Some(&bad) = labels.iter().find(|&&y| y >= t.k()) {
        return Err(Error::invalid(format!("label {bad} out of range for k = {}", t.k())));
    }
    let samplers = t.samplers();
    let mut rng = rng::stream(seed, "corrupt-labels");
    Ok(labels.iter().map(|&y| samplers[y].sample(&mut rng)).collect())
}

/// Symmetric noise: keep with probability `1 - rate`, otherwise flip to one
/// of the other `k - 1` classes uniformly.
pub fn uniform_noise(k: usize, rate: f64) -> Result<TransitionMatrix> {
    if k < 2 {
        return Err(Error::invalid("uniform_noise needs k >= 2"));
    }
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("rate {rate} outside [0, 1)")));
    }
    let off = rate / (k - 1) as f64;
    TransitionMatrix::new(
        (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 - rate } else { off }).collect())
            .collect(),
    )
}

/// Pair (circular) noise: class `i` flips to `(i + 1) mod k` with probability `rate`.
pub fn pair_noise(k: usize, rate: f64) -> Result<TransitionMatrix> {
    if k < 2 {
        return Err(Error::invalid("pair_noise needs k >= 2"));
    }
    if !(0.0..0.5).contains(&rate) {
        return Err(Error::invalid(format!(
            "pair noise rate {rate} outside [0, 0.5); diagonal dominance would fail"
        )));
    }
    let mut rows = vec![vec![0.0; k]; k];
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] = 1.0 - rate;
        row[(i + 1) % k] += rate;
    }
    TransitionMatrix::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tm(rows: &[&[f64]]) -> TransitionMatrix {
        TransitionMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn noise_rate_examples() {
        let half = ClassPrior::uniform(2).unwrap();
        let t = tm(&[&[0.75, 0.25], &[0.25, 0.75]]);
        assert!((noise_rate(&t, &half).unwrap() - 0.25).abs() < 1e-15);
        let t = tm(&[&[0.7, 0.3], &[0.2, 0.8]]);
        assert!((noise_rate(&t, &half).unwrap() - 0.25).abs() < 1e-15);
        let prior = ClassPrior::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(
            noise_rate(&TransitionMatrix::identity(3).unwrap(), &prior).unwrap(),
            0.0
        );
        assert!(matches!(noise_rate(&t, &prior), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn dominance_examples() {
        assert!(tm(&[&[0.75, 0.25], &[0.25, 0.75]]).is_diagonally_dominant());
        assert!(!tm(&[&[0.5, 0.5], &[0.5, 0.5]]).is_diagonally_dominant());
        assert!(tm(&[&[0.4, 0.3, 0.3], &[0.3, 0.4, 0.3], &[0.3, 0.3, 0.4]]).is_diagonally_dominant());
        assert!(!tm(&[&[0.4, 0.6], &[0.0, 1.0]]).is_diagonally_dominant());
    }

    #[test]
    fn constructors() {
        assert_eq!(uniform_noise(2, 0.25).unwrap(), tm(&[&[0.75, 0.25], &[0.25, 0.75]]));
        assert_eq!(uniform_noise(10, 0.0).unwrap(), TransitionMatrix::identity(10).unwrap());
        let u = uniform_noise(10, 0.4).unwrap();
        assert!((u.get(3, 3) - 0.6).abs() < 1e-15);
        assert!((u.get(3, 7) - 0.4 / 9.0).abs() < 1e-15);
        assert!(u.is_diagonally_dominant());

        let p = pair_noise(3, 0.3).unwrap();
        assert_eq!(
            p.rows(),
            &[vec![0.7, 0.3, 0.0], vec![0.0, 0.7, 0.3], vec![0.3, 0.0, 0.7]]
        );
        assert_eq!(pair_noise(5, 0.0).unwrap(), TransitionMatrix::identity(5).unwrap());
        assert_eq!(pair_noise(2, 0.4).unwrap(), uniform_noise(2, 0.4).unwrap());

        assert!(uniform_noise(3, 1.0).is_err());
        assert!(uniform_noise(3, -0.1).is_err());
        assert!(pair_noise(3, 0.5).is_err());
    }

    #[test]
    fn validation_rejects_bad_rows_without_renormalizing() {
        assert!(TransitionMatrix::new(vec![vec![0.6, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(TransitionMatrix::new(vec![vec![1.2, -0.2], vec![0.5, 0.5]]).is_err());
        assert!(TransitionMatrix::new(vec![vec![1.0, 0.0]]).is_err());
        let t = TransitionMatrix::normalized(vec![vec![3.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(t.rows(), &[vec![0.75, 0.25], vec![0.5, 0.5]]);
    }

    #[test]
    fn corrupt_labels_edge_cases() {
        let labels: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let id = TransitionMatrix::identity(3).unwrap();
        assert_eq!(corrupt_labels(&labels, &id, 11).unwrap(), labels);

        let to_two = tm(&[&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]]);
        assert!(corrupt_labels(&labels, &to_two, 3).unwrap().iter().all(|&y| y == 2));

        assert!(matches!(
            corrupt_labels(&[0, 3], &id, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn corrupt_labels_flip_frequency() {
        let t = tm(&[&[0.7, 0.3], &[0.2, 0.8]]);
        let labels = vec![0usize; 1_000_000];
        let noisy = corrupt_labels(&labels, &t, 2024).unwrap();
        let flipped = noisy.iter().filter(|&&y| y == 1).count() as f64 / 1e6;
        assert!((flipped - 0.3).abs() < 0.003, "flip frequency {flipped}");
    }

    #[test]
    fn json_round_trip_validates() {
        let t = pair_noise(4, 0.2).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.starts_with("{\"k\":4,\"rows\":"));
        let back: TransitionMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<TransitionMatrix>(r#"{"k":2,"rows":[[0.9,0.2],[0.5,0.5]]}"#).is_err());
        assert!(serde_json::from_str::<TransitionMatrix>(r#"{"k":3,"rows":[[1,0],[0,1]]}"#).is_err());
    }
}
