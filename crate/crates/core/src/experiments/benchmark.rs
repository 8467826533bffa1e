use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::median;
use super::sweep::DatasetSpec;
use crate::classifier::{confusion, lookup_classifier, BatchMode, ConfusionMatrix, TieBreak, TrainConfig};
use crate::data::{stratified_sample, tabular_world_refined};
use crate::error::{Error, Result};
use crate::noise::{corrupt_labels, uniform_noise, TransitionMatrix};
use crate::nts::run_nts;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NtsBenchConfig {
    pub dataset: DatasetSpec,
    pub noise: TransitionMatrix,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub seeds: usize,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for NtsBenchConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec {
                kind: super::DatasetKind::Moons,
                sigma: None,
            },
            noise: uniform_noise(2, 0.3).expect("valid rate"),
            train_size: 2000,
            val_size: 500,
            test_size: 10_000,
            seeds: 10,
            train: TrainConfig {
                learning_rate: 0.02,
                momentum: 0.9,
                batch: BatchMode::MiniBatch(256),
                checkpoint_every: 400,
                ..TrainConfig::default()
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtsBenchRow {
    pub repeat: usize,
    pub nt_step: usize,
    pub ns_step: usize,
    pub last_epoch_acc: f64,
    pub nt_acc: f64,
    pub ns_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtsBenchResult {
    pub rows: Vec<NtsBenchRow>,
    pub median_last_epoch_acc: f64,
    pub median_nt_acc: f64,
    pub median_ns_acc: f64,
}

/// Independent NTS runs on fresh noisy train/validation draws, scored on a
/// shared clean test set.
pub fn run_nts_benchmark(cfg: &NtsBenchConfig) -> Result<NtsBenchResult> {
    if cfg.seeds == 0 || cfg.train_size == 0 || cfg.val_size == 0 || cfg.test_size == 0 {
        return Err(Error::invalid("sizes and seed count must be positive"));
    }
    cfg.train.validate()?;
    let test = cfg
        .dataset
        .generate(cfg.test_size, derive_seed(cfg.seed, "nts-clean-test", &[]))?;
    let rows = (0..cfg.seeds)
        .into_par_iter()
        .map(|r| {
            let s = derive_seed(cfg.seed, "nts-run", &[r as u64]);
            let draw = |tag: &str, m: usize| -> Result<_> {
                let clean = cfg.dataset.generate(m, derive_seed(s, tag, &[0]))?;
                clean.with_labels(corrupt_labels(clean.labels(), &cfg.noise, derive_seed(s, tag, &[1]))?)
            };
            let train = draw("train", cfg.train_size)?;
            let val = draw("val", cfg.val_size)?;
            let train_cfg = TrainConfig {
                seed: derive_seed(s, "init", &[]),
                ..cfg.train.clone()
            };
            let rep = run_nts(&train, &val, &train_cfg, Some(&test))?;
            let diag = |v: Option<f64>| v.ok_or_else(|| Error::Internal("missing clean accuracy".into()));
            Ok(NtsBenchRow {
                repeat: r,
                nt_step: rep.nt_step,
                ns_step: rep.ns_step,
                last_epoch_acc: diag(rep.last_epoch_acc)?,
                nt_acc: diag(rep.nt_acc)?,
                ns_acc: diag(rep.ns_acc)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&NtsBenchRow) -> f64| median(&rows.iter().map(f).collect::<Vec<_>>());
    Ok(NtsBenchResult {
        median_last_epoch_acc: col(|r| r.last_epoch_acc),
        median_nt_acc: col(|r| r.nt_acc),
        median_ns_acc: col(|r| r.ns_acc),
        rows,
    })
}

/// Confusion, against true labels, of a lookup classifier memorizing a noisy
/// sample with one draw at each of `m` distinct points of the refined tabular
/// world. `m` must be a multiple of 8.
pub fn lookup_confusion(m: usize, t: &TransitionMatrix, seed: u64) -> Result<ConfusionMatrix> {
    if m == 0 || !m.is_multiple_of(8) {
        return Err(Error::invalid(format!("m = {m} must be a positive multiple of 8")));
    }
    let world = tabular_world_refined(m / 8);
    let noisy = stratified_sample(&world, t, seed)?;
    let h = lookup_classifier(&noisy, TieBreak::LowestClass, 0);
    confusion(&h, &world.support_dataset())
}
