//! Closed-form evaluators: noisy accuracy from a confusion matrix, its
//! ceiling and gap, the clean-accuracy guarantee, the VC training bound and
//! the Hoeffding validation bound, plus a Monte-Carlo audit of the latter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{Classifier, ConfusionMatrix};
use crate::data::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::noise::{check_k, noise_rate, ClassPrior, TransitionMatrix};
use crate::oracle::{exact_noisy_accuracy, DiscreteClassifier};
use crate::rng::{self, Categorical};

/// Inputs of the two sample-size bounds. `d_vc` is supplied by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub d_vc: f64,
    pub delta: f64,
    pub m: u64,
    pub n: u64,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid(format!("delta {delta} outside (0, 1]")));
    }
    Ok(())
}

fn check_confusion(c: &ConfusionMatrix, t: &TransitionMatrix, prior: &ClassPrior) -> Result<()> {
    check_k(c.k(), t.k(), "confusion vs transition matrix")?;
    check_k(c.k(), prior.k(), "confusion vs prior")?;
    if !c.is_complete() {
        return Err(Error::invalid("confusion matrix has undefined rows"));
    }
    Ok(())
}

/// `sum_i prior[i] * sum_j T[i][j] * C[i][j]`: accuracy against noisy labels
/// of any classifier with confusion `c`.
pub fn noisy_accuracy(c: &ConfusionMatrix, t: &TransitionMatrix, prior: &ClassPrior) -> Result<f64> {
    check_confusion(c, t, prior)?;
    Ok(prior
        .probs()
        .iter()
        .zip(c.rows().iter().zip(t.rows()))
        .map(|(p, (c_row, t_row))| p * c_row.iter().zip(t_row).map(|(c, t)| c * t).sum::<f64>())
        .sum())
}

/// The best achievable noisy accuracy, `1 - noise_rate`, attained exactly by
/// classifiers whose confusion is the identity.
pub fn max_noisy_accuracy(t: &TransitionMatrix, prior: &ClassPrior) -> Result<f64> {
    if !t.is_diagonally_dominant() {
        return Err(Error::AssumptionViolated(
            "transition matrix is not diagonally dominant".into(),
        ));
    }
    if !prior.is_strictly_positive() {
        return Err(Error::AssumptionViolated(
            "every class needs positive prior mass".into(),
        ));
    }
    Ok(1.0 - noise_rate(t, prior)?)
}

/// `sum_{i, j != i} prior[i] * (T[i][i] - T[i][j]) * C[i][j]`, which equals
/// `max_noisy_accuracy - noisy_accuracy` for row-stochastic `c`.
pub fn noisy_gap_identity(c: &ConfusionMatrix, t: &TransitionMatrix, prior: &ClassPrior) -> Result<f64> {
    check_confusion(c, t, prior)?;
    let mut gap = 0.0;
    for (i, p) in prior.probs().iter().enumerate() {
        for j in (0..c.k()).filter(|&j| j != i) {
            gap += p * (t.get(i, i) - t.get(i, j)) * c.get(i, j);
        }
    }
    Ok(gap)
}

/// Guaranteed clean accuracy given the shortfall `noisy_gap` from the noisy
/// ceiling: `max(0, 1 - noisy_gap / min_{i, j != i}(T[i][i] - T[i][j]))`.
pub fn clean_accuracy_lower_bound(noisy_gap: f64, t: &TransitionMatrix) -> Result<f64> {
    if !t.is_diagonally_dominant() {
        return Err(Error::AssumptionViolated("zero dominance margin".into()));
    }
    if noisy_gap.is_nan() || noisy_gap < 0.0 {
        return Err(Error::invalid(format!("noisy gap {noisy_gap} must be >= 0")));
    }
    Ok((1.0 - noisy_gap / t.min_margin()).max(0.0))
}

/// Uniform deviation of noisy-distribution accuracy below training accuracy
/// over a hypothesis space of VC dimension `d_vc`:
/// `sqrt(8 (d_vc (ln(2m / d_vc) + 1) + ln(4 / delta)) / m)`.
pub fn generalization_gap_bound(p: &BoundParams) -> Result<f64> {
    check_delta(p.delta)?;
    if !(p.d_vc > 0.0 && p.d_vc.is_finite()) {
        return Err(Error::invalid(format!("VC dimension {} must be positive", p.d_vc)));
    }
    if p.m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    let m = p.m as f64;
    if 2.0 * m <= p.d_vc {
        return Err(Error::invalid(format!(
            "2m = {} must exceed d_vc = {}",
            2.0 * m,
            p.d_vc
        )));
    }
    let inner = p.d_vc * ((2.0 * m / p.d_vc).ln() + 1.0) + (4.0 / p.delta).ln();
    Ok((8.0 * inner / m).sqrt())
}

/// Hoeffding deviation for a fixed classifier on `n` noisy validation
/// samples: `sqrt(ln(1 / delta) / (2n))`.
pub fn validation_gap_bound(n: u64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    Ok(((1.0 / delta).ln() / (2.0 * n as f64)).sqrt())
}

/// Validation bound with `delta` split evenly over `candidates` classifiers
/// (union bound). Covers selecting among checkpoints, which the single-
/// classifier bound does not.
pub fn validation_gap_bound_bonferroni(n: u64, delta: f64, candidates: usize) -> Result<f64> {
    check_delta(delta)?;
    if candidates == 0 {
        return Err(Error::invalid("need at least one candidate"));
    }
    validation_gap_bound(n, delta / candidates as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub n: u64,
    pub delta: f64,
    pub trials: usize,
    pub bound: f64,
    pub exact_noisy_accuracy: f64,
    pub violations: usize,
    pub violation_frequency: f64,
}

/// Draws `trials` noisy validation sets of size `n` from `(d, t)` and counts
/// how often `A_noisy(h) - A_val(h) < -validation_gap_bound(n, delta)`.
/// `h` must be fixed independently of the drawn sets.
pub fn audit_validation_bound<C: Classifier + ?Sized>(
    h: &C,
    d: &DiscreteDistribution,
    t: &TransitionMatrix,
    n: u64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<AuditResult> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    check_k(d.k(), t.k(), "audit")?;
    check_k(d.k(), h.num_classes(), "audit classifier")?;
    if let Some(dim) = h.input_dim() {
        if dim != d.dim() {
            return Err(Error::invalid(format!(
                "classifier expects {dim} features, world has {}",
                d.dim()
            )));
        }
    }
    let bound = validation_gap_bound(n, delta)?;
    let h = DiscreteClassifier::from_classifier(h, d)?;
    let exact = exact_noisy_accuracy(&h, d, t)?;
    let points = Categorical::new(d.point_probs());
    let rows = t.samplers();
    let assignment = h.assignment();
    let violations = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng::stream_at(seed, "audit-validation", &[trial as u64]);
            let hits = d
                .sample_indices_with(n as usize, &points, &rows, &mut rng)
                .into_iter()
                .filter(|&(x, y)| assignment[x] == y)
                .count();
            let val_acc = hits as f64 / n as f64;
            usize::from(exact - val_acc < -bound)
        })
        .sum::<usize>();
    Ok(AuditResult {
        n,
        delta,
        trials,
        bound,
        exact_noisy_accuracy: exact,
        violations,
        violation_frequency: violations as f64 / trials as f64,
    })
}
