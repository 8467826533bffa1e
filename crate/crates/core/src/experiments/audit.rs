use serde::{Deserialize, Serialize};

use crate::bounds::{audit_validation_bound, generalization_gap_bound, AuditResult, BoundParams};
use crate::data::{sample_iid, tabular_world};
use crate::error::Result;
use crate::noise::uniform_noise;
use crate::oracle::{all_classifiers, exact_noisy_accuracy, DiscreteClassifier};
use crate::rng::derive_seed;

const AUDIT_N: [u64; 3] = [100, 1000, 4000];
const AUDIT_DELTA: [f64; 4] = [0.01, 0.05, 0.1, 1.0];
const AUDIT_TRIALS: usize = 10_000;
const GEN_M: [u64; 3] = [1000, 10_000, 100_000];
const GEN_DELTA: f64 = 0.05;
/// VC dimension of all labelings of the 8-point support.
const LOOKUP_DVC: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub classifier: String,
    pub audit: AuditResult,
    /// `delta + 3 * sqrt(delta (1 - delta) / trials)`.
    pub tolerance: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationCheck {
    pub m: u64,
    pub d_vc: f64,
    pub delta: f64,
    pub bound: f64,
    /// `max_h |A_train(h) - A_noisy(h)|` over every labeling of the support.
    pub worst_gap: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSuite {
    pub seed: u64,
    pub validation: Vec<ValidationCheck>,
    pub generalization: Vec<GeneralizationCheck>,
    pub all_hold: bool,
}

/// Validation-bound audits for two fixed classifiers over an `(n, delta)`
/// grid, and the generalization bound against the measured worst-case gap
/// of the full lookup family, all on the tabular world with 25% uniform noise.
pub fn run_bound_audit_suite(seed: u64) -> Result<AuditSuite> {
    let world = tabular_world();
    let t = uniform_noise(2, 0.25)?;
    let best = DiscreteClassifier::new(world.true_labels().to_vec(), 2);
    let mut half = world.true_labels().to_vec();
    for y in half.iter_mut().skip(4) {
        *y = 1 - *y;
    }
    let fixed = [("h_star", best), ("half_flipped", DiscreteClassifier::new(half, 2))];

    let mut validation = Vec::new();
    for (ci, (name, h)) in fixed.iter().enumerate() {
        for &n in &AUDIT_N {
            for &delta in &AUDIT_DELTA {
                let s = derive_seed(seed, "audit-suite", &[ci as u64, n, delta.to_bits()]);
                let audit = audit_validation_bound(&h.bind(&world), &world, &t, n, delta, AUDIT_TRIALS, s)?;
                let tolerance = delta + 3.0 * (delta * (1.0 - delta) / AUDIT_TRIALS as f64).sqrt();
                validation.push(ValidationCheck {
                    classifier: name.to_string(),
                    holds: audit.violation_frequency <= tolerance,
                    audit,
                    tolerance,
                });
            }
        }
    }

    let family = all_classifiers(&world)?;
    let exact = family
        .iter()
        .map(|h| exact_noisy_accuracy(h, &world, &t))
        .collect::<Result<Vec<_>>>()?;
    let mut generalization = Vec::new();
    for &m in &GEN_M {
        let sample = sample_iid(&world, m as usize, &t, derive_seed(seed, "audit-gen", &[m]))?;
        let mut counts = vec![[0u64; 2]; world.len()];
        for (x, &y) in sample.rows().zip(sample.labels()) {
            counts[world.index_of(x).expect("sampled from the world")][y] += 1;
        }
        let worst_gap = family
            .iter()
            .zip(&exact)
            .map(|(h, &a)| {
                let hits: u64 = h.assignment().iter().enumerate().map(|(x, &c)| counts[x][c]).sum();
                (hits as f64 / m as f64 - a).abs()
            })
            .fold(0.0, f64::max);
        let bound = generalization_gap_bound(&BoundParams {
            d_vc: LOOKUP_DVC,
            delta: GEN_DELTA,
            m,
            n: 1,
        })?;
        generalization.push(GeneralizationCheck {
            m,
            d_vc: LOOKUP_DVC,
            delta: GEN_DELTA,
            bound,
            worst_gap,
            holds: worst_gap <= bound,
        });
    }
    let all_hold = validation.iter().all(|v| v.holds) && generalization.iter().all(|g| g.holds);
    Ok(AuditSuite {
        seed,
        validation,
        generalization,
        all_hold,
    })
}
