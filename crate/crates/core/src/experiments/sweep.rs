use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mean_std;
use crate::classifier::{accuracy, confusion, train_mlp, BatchMode, TrainConfig};
use crate::data::{make_circles, make_moons, LabeledDataset, CIRCLES_SIGMA, MOONS_SIGMA};
use crate::error::{Error, Result};
use crate::noise::{corrupt_labels, TransitionMatrix};
use crate::rng::derive_seed;

pub const DEFAULT_SIZES: [usize; 7] = [8, 32, 128, 512, 2048, 8192, 32768];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Moons,
    Circles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    /// Gaussian feature noise; the generator's default when absent.
    #[serde(default)]
    pub sigma: Option<f64>,
}

impl DatasetSpec {
    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(match self.kind {
            DatasetKind::Moons => MOONS_SIGMA,
            DatasetKind::Circles => CIRCLES_SIGMA,
        })
    }

    pub fn generate(&self, m: usize, seed: u64) -> Result<LabeledDataset> {
        match self.kind {
            DatasetKind::Moons => make_moons(m, self.sigma(), seed),
            DatasetKind::Circles => make_circles(m, self.sigma(), seed),
        }
    }
}

fn default_dataset() -> DatasetSpec {
    DatasetSpec {
        kind: DatasetKind::Moons,
        sigma: None,
    }
}

fn default_noise() -> TransitionMatrix {
    TransitionMatrix::new(vec![vec![0.7, 0.3], vec![0.2, 0.8]]).expect("valid matrix")
}

fn default_sizes() -> Vec<usize> {
    DEFAULT_SIZES.to_vec()
}

fn default_repeats() -> usize {
    10
}

fn default_test_size() -> usize {
    10_000
}

/// Momentum SGD on mini-batches of 256 (full batch below that) for 50000
/// steps, scored only at the final step.
pub fn default_sweep_training() -> TrainConfig {
    TrainConfig {
        max_steps: 50_000,
        learning_rate: 0.02,
        momentum: 0.9,
        batch: BatchMode::MiniBatch(256),
        checkpoint_every: 50_000,
        ..TrainConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_dataset")]
    pub dataset: DatasetSpec,
    #[serde(default = "default_noise")]
    pub noise: TransitionMatrix,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_sweep_training")]
    pub train: TrainConfig,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            dataset: default_dataset(),
            noise: default_noise(),
            sizes: default_sizes(),
            repeats: default_repeats(),
            train: default_sweep_training(),
            test_size: default_test_size(),
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes[0] == 0 {
            return Err(Error::invalid("sizes must be nonempty and positive"));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sizes must be strictly increasing"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1"));
        }
        if self.test_size == 0 {
            return Err(Error::invalid("test_size must be positive"));
        }
        if self.noise.k() != 2 {
            return Err(Error::invalid("synthetic datasets have 2 classes"));
        }
        if let Some(s) = self.dataset.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("sigma {s} must be finite and nonnegative")));
            }
        }
        self.train.validate()
    }

    pub fn clean_test_set(&self) -> Result<LabeledDataset> {
        self.dataset
            .generate(self.test_size, derive_seed(self.seed, "sweep-clean-test", &[]))
    }

    fn cell_seed(&self, m: usize, repeat: usize) -> u64 {
        derive_seed(self.seed, "sweep-cell", &[m as u64, repeat as u64])
    }
}

/// One `(m, repeat)` run. A diverged run has `failed` set and NaN entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub m: usize,
    pub repeat: usize,
    pub final_train_acc: f64,
    pub final_test_acc: f64,
    /// Confusion of the final model against true labels, on the clean test set.
    pub confusion: Vec<Vec<f64>>,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregate {
    pub m: usize,
    pub mean_train_acc: f64,
    pub mean_test_acc: f64,
    pub std_train_acc: f64,
    pub std_test_acc: f64,
    pub mean_confusion: Vec<Vec<f64>>,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub k: usize,
    pub cells: Vec<SweepCell>,
    pub aggregates: Vec<SweepAggregate>,
}

impl SweepResult {
    pub fn empty(k: usize) -> Self {
        Self {
            k,
            cells: Vec::new(),
            aggregates: Vec::new(),
        }
    }

    /// Groups cells by `m` (in order of first appearance) and summarizes the
    /// ones that did not fail.
    pub fn from_cells(k: usize, cells: Vec<SweepCell>) -> Self {
        let mut sizes: Vec<usize> = Vec::new();
        for c in &cells {
            if !sizes.contains(&c.m) {
                sizes.push(c.m);
            }
        }
        let aggregates = sizes
            .into_iter()
            .map(|m| {
                let group: Vec<&SweepCell> = cells.iter().filter(|c| c.m == m).collect();
                let ok: Vec<&SweepCell> = group.iter().copied().filter(|c| !c.failed).collect();
                let train: Vec<f64> = ok.iter().map(|c| c.final_train_acc).collect();
                let test: Vec<f64> = ok.iter().map(|c| c.final_test_acc).collect();
                let (mean_train_acc, std_train_acc) = mean_std(&train);
                let (mean_test_acc, std_test_acc) = mean_std(&test);
                let mean_confusion = (0..k)
                    .map(|i| {
                        (0..k)
                            .map(|j| ok.iter().map(|c| c.confusion[i][j]).sum::<f64>() / ok.len() as f64)
                            .collect()
                    })
                    .collect();
                SweepAggregate {
                    m,
                    mean_train_acc,
                    mean_test_acc,
                    std_train_acc,
                    std_test_acc,
                    mean_confusion,
                    failed: group.len() - ok.len(),
                }
            })
            .collect();
        Self { k, cells, aggregates }
    }

    pub fn aggregate(&self, m: usize) -> Option<&SweepAggregate> {
        self.aggregates.iter().find(|a| a.m == m)
    }
}

/// Runs a single cell against a prebuilt clean test set.
pub fn run_sweep_cell(cfg: &SweepConfig, m: usize, repeat: usize, test: &LabeledDataset) -> Result<SweepCell> {
    let seed = cfg.cell_seed(m, repeat);
    let clean = cfg.dataset.generate(m, derive_seed(seed, "train-data", &[]))?;
    let noisy = clean.with_labels(corrupt_labels(
        clean.labels(),
        &cfg.noise,
        derive_seed(seed, "train-noise", &[]),
    )?)?;
    let train_cfg = TrainConfig {
        seed: derive_seed(seed, "train-init", &[]),
        ..cfg.train.clone()
    };
    let k = cfg.noise.k();
    match train_mlp(&noisy, &train_cfg, None) {
        Ok((params, _)) => Ok(SweepCell {
            m,
            repeat,
            final_train_acc: accuracy(&params, &noisy)?,
            final_test_acc: accuracy(&params, test)?,
            confusion: confusion(&params, test)?.rows().to_vec(),
            failed: false,
        }),
        Err(Error::TrainingDiverged { .. }) => Ok(SweepCell {
            m,
            repeat,
            final_train_acc: f64::NAN,
            final_test_acc: f64::NAN,
            confusion: vec![vec![f64::NAN; k]; k],
            failed: true,
        }),
        Err(e) => Err(e),
    }
}

/// Every `(m, repeat)` cell, in parallel, collected in grid order.
pub fn run_regime_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let test = cfg.clean_test_set()?;
    let grid: Vec<(usize, usize)> = cfg
        .sizes
        .iter()
        .flat_map(|&m| (0..cfg.repeats).map(move |r| (m, r)))
        .collect();
    let cells = grid
        .par_iter()
        .map(|&(m, r)| run_sweep_cell(cfg, m, r, &test))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult::from_cells(cfg.noise.k(), cells))
}
