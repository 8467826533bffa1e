//! Plain SGD on softmax cross-entropy with periodic checkpoints.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::accuracy_of;
use super::mlp::{Gradients, MlpParams, Workspace};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    #[default]
    Full,
    /// Shuffled mini-batches of this size, reshuffled every epoch. Datasets
    /// no larger than the batch size are trained full-batch.
    MiniBatch(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Hidden layer widths; input and output widths come from the data.
    pub hidden: Vec<usize>,
    pub max_steps: usize,
    pub learning_rate: f64,
    /// Heavy-ball coefficient: `v = momentum * v + g`, `params -= lr * v`.
    pub momentum: f64,
    pub batch: BatchMode,
    pub seed: u64,
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            max_steps: 20_000,
            learning_rate: 0.1,
            momentum: 0.0,
            batch: BatchMode::Full,
            seed: 0,
            checkpoint_every: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be at least 1"));
        }
        // A zero rate is accepted: it freezes the network, which is useful as a control.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {} must be finite and >= 0",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::invalid("checkpoint_every must be at least 1"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layers must be nonempty"));
        }
        if self.batch == BatchMode::MiniBatch(0) {
            return Err(Error::invalid("mini-batch size must be at least 1"));
        }
        Ok(())
    }

    pub fn layer_sizes(&self, input: usize, classes: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(classes);
        sizes
    }
}

/// Snapshot of a training run. Selection reads only `step` and
/// `noisy_val_acc`; `clean_test_acc` is a diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub step: usize,
    pub params: MlpParams,
    pub train_acc: f64,
    pub noisy_val_acc: Option<f64>,
    pub clean_test_acc: Option<f64>,
}

/// Step-at-a-time SGD driver.
#[derive(Debug)]
pub struct Trainer<'a> {
    params: MlpParams,
    data: &'a LabeledDataset,
    cfg: TrainConfig,
    grads: Gradients,
    velocity: Option<Gradients>,
    ws: Workspace,
    scratch: Vec<f64>,
    order: Vec<usize>,
    cursor: usize,
    rng: rng::Rng,
    steps_done: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a LabeledDataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::invalid("cannot train on an empty dataset"));
        }
        let params = MlpParams::init(&cfg.layer_sizes(data.dim(), data.k()), cfg.seed)?;
        Ok(Self::with_params(data, cfg, params))
    }

    fn with_params(data: &'a LabeledDataset, cfg: &TrainConfig, params: MlpParams) -> Self {
        let grads = params.new_gradients();
        let velocity = (cfg.momentum > 0.0).then(|| params.new_gradients());
        Self {
            params,
            data,
            cfg: cfg.clone(),
            grads,
            velocity,
            ws: Workspace::default(),
            scratch: Vec::new(),
            order: (0..data.len()).collect(),
            cursor: data.len(),
            rng: rng::stream(cfg.seed, "minibatch"),
            steps_done: 0,
        }
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn into_params(self) -> MlpParams {
        self.params
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    /// One SGD update; returns the loss of the batch before the update.
    pub fn step(&mut self) -> Result<f64> {
        let batch_size = match self.cfg.batch {
            BatchMode::MiniBatch(b) if b < self.data.len() => Some(b),
            _ => None,
        };
        let loss = match batch_size {
            None => self
                .params
                .loss_and_grad_into(self.data, None, &mut self.ws, &mut self.scratch, &mut self.grads),
            Some(b) => {
                if self.cursor + b > self.order.len() {
                    self.order.shuffle(&mut self.rng);
                    self.cursor = 0;
                }
                let idx = &self.order[self.cursor..self.cursor + b];
                self.cursor += b;
                self.params
                    .loss_and_grad_into(self.data, Some(idx), &mut self.ws, &mut self.scratch, &mut self.grads)
            }
        };
        self.steps_done += 1;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged {
                step: self.steps_done,
                last: None,
            });
        }
        match &mut self.velocity {
            None => self.params.apply(&self.grads, self.cfg.learning_rate),
            Some(v) => {
                v.accumulate(&self.grads, self.cfg.momentum);
                self.params.apply(v, self.cfg.learning_rate);
            }
        }
        Ok(loss)
    }

    fn predict(&mut self, ds: &LabeledDataset) -> Vec<usize> {
        self.params.predict_rows(ds, &mut self.ws)
    }
}

/// Trains on `train`, recording a checkpoint every `checkpoint_every` steps
/// and at the final step. `monitor` accuracy goes into `noisy_val_acc`.
pub fn train_mlp(
    train: &LabeledDataset,
    cfg: &TrainConfig,
    monitor: Option<&LabeledDataset>,
) -> Result<(MlpParams, Vec<CheckpointRecord>)> {
    train_mlp_observed(train, cfg, monitor, None)
}

/// As [`train_mlp`], additionally scoring each checkpoint on `diagnostic`
/// (stored in `clean_test_acc`).
pub fn train_mlp_observed(
    train: &LabeledDataset,
    cfg: &TrainConfig,
    monitor: Option<&LabeledDataset>,
    diagnostic: Option<&LabeledDataset>,
) -> Result<(MlpParams, Vec<CheckpointRecord>)> {
    let mut trainer = Trainer::new(train, cfg)?;
    for extra in [monitor, diagnostic].into_iter().flatten() {
        trainer.params.check_dataset(extra)?;
        if extra.is_empty() {
            return Err(Error::invalid("monitor datasets must be nonempty"));
        }
    }
    let mut checkpoints: Vec<CheckpointRecord> = Vec::with_capacity(cfg.max_steps / cfg.checkpoint_every + 1);
    for step in 1..=cfg.max_steps {
        if let Err(e) = trainer.step() {
            return Err(diverged(e, &checkpoints));
        }
        if step % cfg.checkpoint_every == 0 || step == cfg.max_steps {
            if !trainer.params.is_finite() {
                return Err(diverged(Error::TrainingDiverged { step, last: None }, &checkpoints));
            }
            let train_acc = accuracy_of(&trainer.predict(train), train.labels());
            let noisy_val_acc = monitor.map(|m| accuracy_of(&trainer.predict(m), m.labels()));
            let clean_test_acc = diagnostic.map(|d| accuracy_of(&trainer.predict(d), d.labels()));
            checkpoints.push(CheckpointRecord {
                step,
                params: trainer.params.clone(),
                train_acc,
                noisy_val_acc,
                clean_test_acc,
            });
        }
    }
    Ok((trainer.into_params(), checkpoints))
}

fn diverged(e: Error, checkpoints: &[CheckpointRecord]) -> Error {
    match e {
        Error::TrainingDiverged { step, .. } => Error::TrainingDiverged {
            step,
            last: checkpoints.last().cloned().map(Box::new),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_moons, tabular_world, MOONS_SIGMA};

    fn quick(max_steps: usize, lr: f64) -> TrainConfig {
        TrainConfig {
            max_steps,
            learning_rate: lr,
            checkpoint_every: 10,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let ds = make_moons(50, MOONS_SIGMA, 0).unwrap();
        let cfg = quick(35, 0.0);
        let (params, ckpts) = train_mlp(&ds, &cfg, None).unwrap();
        assert_eq!(params, MlpParams::init(&[2, 32, 32, 2], 0).unwrap());
        assert_eq!(ckpts.iter().map(|c| c.step).collect::<Vec<_>>(), vec![10, 20, 30, 35]);
        assert!(ckpts
            .windows(2)
            .all(|w| w[0].params == w[1].params && w[0].train_acc == w[1].train_acc));
    }

    #[test]
    fn memorizes_eight_distinct_points() {
        let w = tabular_world();
        // A noisy labeling with two flips, one per class.
        let labels = vec![0, 1, 0, 0, 1, 1, 0, 1];
        let ds = LabeledDataset::from_rows(w.points(), labels, 2).unwrap();
        let (_, ckpts) = train_mlp(&ds, &quick(3000, 0.1), None).unwrap();
        assert_eq!(ckpts.last().unwrap().train_acc, 1.0);
    }

    #[test]
    fn clean_moons_fit() {
        let ds = make_moons(1000, MOONS_SIGMA, 1).unwrap();
        let (_, ckpts) = train_mlp(
            &ds,
            &TrainConfig {
                max_steps: 5000,
                ..TrainConfig::default()
            },
            None,
        )
        .unwrap();
        assert!(
            ckpts.last().unwrap().train_acc >= 0.99,
            "{}",
            ckpts.last().unwrap().train_acc
        );
    }

    #[test]
    fn deterministic_checkpoints() {
        let ds = make_moons(200, MOONS_SIGMA, 2).unwrap();
        let cfg = TrainConfig {
            batch: BatchMode::MiniBatch(32),
            ..quick(100, 0.1)
        };
        let a = train_mlp(&ds, &cfg, Some(&ds)).unwrap();
        let b = train_mlp(&ds, &cfg, Some(&ds)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_keeps_last_finite_checkpoint() {
        // Linear model on huge inputs: the first update is finite, the second overflows.
        let ds = LabeledDataset::new(1, vec![1e150, 1e150], vec![0, 1], 2).unwrap();
        let cfg = TrainConfig {
            hidden: vec![],
            max_steps: 10,
            learning_rate: 1e150,
            checkpoint_every: 1,
            ..TrainConfig::default()
        };
        match train_mlp(&ds, &cfg, None) {
            Err(Error::TrainingDiverged { step, last }) => {
                let last = last.expect("a finite checkpoint precedes the blow-up");
                assert!(last.step < step && last.params.is_finite());
            }
            other => panic!("expected divergence, got {:?}", other.map(|r| r.1.len())),
        }
    }

    #[test]
    fn config_validation() {
        let ds = make_moons(10, 0.1, 0).unwrap();
        for bad in [
            TrainConfig {
                max_steps: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                learning_rate: -1.0,
                ..TrainConfig::default()
            },
            TrainConfig {
                checkpoint_every: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                batch: BatchMode::MiniBatch(0),
                ..TrainConfig::default()
            },
        ] {
            assert!(train_mlp(&ds, &bad, None).is_err());
        }
        let wrong_dim = LabeledDataset::new(3, vec![0.0; 3], vec![0], 2).unwrap();
        assert!(train_mlp(&ds, &quick(1, 0.1), Some(&wrong_dim)).is_err());
    }
}
