//! Noisy-best teacher and student.
//!
//! Train on noisy labels, keep the checkpoint with the best accuracy on a
//! noisy validation set (NT), relabel the training inputs with NT's
//! predictions, retrain with the same configuration, and select the student
//! (NS) the same way.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{check_dim, train_mlp_observed, CheckpointRecord, Classifier, MlpParams, TrainConfig};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};

/// The only fields selection is allowed to look at.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SelectionKey {
    step: usize,
    noisy_val_acc: f64,
}

fn key(c: &CheckpointRecord) -> Result<SelectionKey> {
    let noisy_val_acc = c
        .noisy_val_acc
        .ok_or_else(|| Error::invalid(format!("checkpoint at step {} has no validation accuracy", c.step)))?;
    Ok(SelectionKey {
        step: c.step,
        noisy_val_acc,
    })
}

fn select_key(keys: &[SelectionKey]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, k) in keys.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) => {
                let cur = keys[b];
                if k.noisy_val_acc > cur.noisy_val_acc || (k.noisy_val_acc == cur.noisy_val_acc && k.step < cur.step) {
                    best = Some(i);
                }
            }
        }
    }
    best
}

/// Checkpoint with the highest noisy validation accuracy; ties go to the
/// earliest step.
pub fn select_best(checkpoints: &[CheckpointRecord]) -> Result<&CheckpointRecord> {
    let keys = checkpoints.iter().map(key).collect::<Result<Vec<_>>>()?;
    select_key(&keys)
        .map(|i| &checkpoints[i])
        .ok_or_else(|| Error::invalid("cannot select from an empty checkpoint list"))
}

/// Replaces every label with the teacher's hard prediction.
pub fn relabel<C: Classifier + ?Sized>(teacher: &C, inputs: &LabeledDataset) -> Result<LabeledDataset> {
    check_dim(teacher, inputs)?;
    if teacher.num_classes() != inputs.k() {
        return Err(Error::invalid(format!(
            "teacher predicts {} classes, dataset has {}",
            teacher.num_classes(),
            inputs.k()
        )));
    }
    inputs.with_labels(teacher.predict_all(inputs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NtsReport {
    pub teacher_checkpoints: Vec<CheckpointRecord>,
    pub student_checkpoints: Vec<CheckpointRecord>,
    pub nt_step: usize,
    pub ns_step: usize,
    pub last_epoch_acc: Option<f64>,
    pub nt_acc: Option<f64>,
    pub ns_acc: Option<f64>,
}

impl NtsReport {
    fn find(trail: &[CheckpointRecord], step: usize) -> &CheckpointRecord {
        trail
            .iter()
            .find(|c| c.step == step)
            .expect("selected step is in its trail")
    }

    pub fn teacher(&self) -> &MlpParams {
        &Self::find(&self.teacher_checkpoints, self.nt_step).params
    }

    pub fn student(&self) -> &MlpParams {
        &Self::find(&self.student_checkpoints, self.ns_step).params
    }

    pub fn to_document(&self) -> NtsDocument {
        NtsDocument {
            nt_step: self.nt_step,
            ns_step: self.ns_step,
            last_epoch_acc: self.last_epoch_acc,
            nt_acc: self.nt_acc,
            ns_acc: self.ns_acc,
            columns: TRAIL_COLUMNS.iter().map(|s| s.to_string()).collect(),
            teacher_trail: trail_rows(&self.teacher_checkpoints),
            student_trail: trail_rows(&self.student_checkpoints),
            teacher: self.teacher().clone(),
            student: self.student().clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())? + "\n")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

pub const TRAIL_COLUMNS: [&str; 4] = ["step", "train_acc", "noisy_val_acc", "clean_test_acc"];

/// Serialized report: checkpoint trails as rows under `columns`, plus the
/// two selected models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtsDocument {
    pub nt_step: usize,
    pub ns_step: usize,
    pub last_epoch_acc: Option<f64>,
    pub nt_acc: Option<f64>,
    pub ns_acc: Option<f64>,
    pub columns: Vec<String>,
    pub teacher_trail: Vec<(usize, f64, Option<f64>, Option<f64>)>,
    pub student_trail: Vec<(usize, f64, Option<f64>, Option<f64>)>,
    pub teacher: MlpParams,
    pub student: MlpParams,
}

fn trail_rows(trail: &[CheckpointRecord]) -> Vec<(usize, f64, Option<f64>, Option<f64>)> {
    trail
        .iter()
        .map(|c| (c.step, c.train_acc, c.noisy_val_acc, c.clean_test_acc))
        .collect()
}

/// Teacher then student, both with `cfg`. `clean_test` only feeds the
/// diagnostic accuracies.
pub fn run_nts(
    train: &LabeledDataset,
    val: &LabeledDataset,
    cfg: &TrainConfig,
    clean_test: Option<&LabeledDataset>,
) -> Result<NtsReport> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::invalid("train and validation sets must be nonempty"));
    }
    if train.dim() != val.dim() || train.k() != val.k() {
        return Err(Error::invalid(format!(
            "train is {}-dim with {} classes, validation is {}-dim with {} classes",
            train.dim(),
            train.k(),
            val.dim(),
            val.k()
        )));
    }
    let (_, teacher_checkpoints) = train_mlp_observed(train, cfg, Some(val), clean_test)?;
    let nt = select_best(&teacher_checkpoints).map_err(|_| Error::Internal("empty teacher trail".into()))?;
    let student_train = relabel(&nt.params, train)?;
    let (_, student_checkpoints) = train_mlp_observed(&student_train, cfg, Some(val), clean_test)?;
    let ns = select_best(&student_checkpoints).map_err(|_| Error::Internal("empty student trail".into()))?;
    Ok(NtsReport {
        nt_step: nt.step,
        ns_step: ns.step,
        last_epoch_acc: teacher_checkpoints.last().and_then(|c| c.clean_test_acc),
        nt_acc: nt.clean_test_acc,
        ns_acc: ns.clean_test_acc,
        teacher_checkpoints,
        student_checkpoints,
    })
}
