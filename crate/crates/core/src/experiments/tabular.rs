use serde::{Deserialize, Serialize};

use crate::data::{sample_iid, stratified_sample, tabular_world, DiscreteDistribution};
use crate::error::Result;
use crate::noise::{uniform_noise, TransitionMatrix};
use crate::oracle::{enumerate_best, exact_clean_accuracy, exact_confusion, exact_noisy_accuracy, Objective};
use crate::rng::derive_seed;

/// Sample sizes of the sampled panels.
pub const PANEL_SIZES: [usize; 3] = [4, 8, 32];

/// Empirical maximizer on one noisy sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePanel {
    pub m: usize,
    /// `(point index, noisy label)` per draw.
    pub sample: Vec<(usize, usize)>,
    pub assignment: Vec<usize>,
    pub unique: bool,
    pub train_acc: f64,
    pub clean_acc: f64,
    pub noisy_acc: f64,
    pub confusion: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPanel {
    pub max_noisy_acc: f64,
    pub assignment: Vec<usize>,
    pub unique: bool,
    pub clean_acc: f64,
    pub confusion: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDemo {
    pub seed: u64,
    pub world: DiscreteDistribution,
    pub noise: TransitionMatrix,
    pub panels: Vec<SamplePanel>,
    pub exact: ExactPanel,
    /// Mean clean accuracy of the m=32 empirical maximizer over `repeats` seeds.
    pub m32_mean_clean_acc: f64,
    pub m32_repeats: usize,
}

fn panel(world: &DiscreteDistribution, t: &TransitionMatrix, m: usize, seed: u64) -> Result<SamplePanel> {
    // The m = |support| panel shows every point once.
    let sample = if m == world.len() {
        stratified_sample(world, t, seed)?
    } else {
        sample_iid(world, m, t, seed)?
    };
    let best = enumerate_best(world, Objective::Empirical(&sample))?;
    let h = &best.classifier;
    Ok(SamplePanel {
        m,
        sample: sample
            .rows()
            .zip(sample.labels())
            .map(|(x, &y)| (world.index_of(x).expect("sampled from the world"), y))
            .collect(),
        assignment: h.assignment().to_vec(),
        unique: best.unique,
        train_acc: best.value,
        clean_acc: exact_clean_accuracy(h, world)?,
        noisy_acc: exact_noisy_accuracy(h, world, t)?,
        confusion: exact_confusion(h, world)?.rows().to_vec(),
    })
}

/// The 8-point example with `T = uniform_noise(2, 0.25)`: empirical
/// maximizers at m = 4, 8, 32 and the exact-distribution maximizer.
pub fn run_tabular_demo(seed: u64) -> Result<TabularDemo> {
    let world = tabular_world();
    let t = uniform_noise(2, 0.25)?;
    let panels = PANEL_SIZES
        .iter()
        .map(|&m| panel(&world, &t, m, derive_seed(seed, "tabular-panel", &[m as u64])))
        .collect::<Result<Vec<_>>>()?;

    let best = enumerate_best(&world, Objective::Noisy(&t))?;
    let exact = ExactPanel {
        max_noisy_acc: best.value,
        assignment: best.classifier.assignment().to_vec(),
        unique: best.unique,
        clean_acc: exact_clean_accuracy(&best.classifier, &world)?,
        confusion: exact_confusion(&best.classifier, &world)?.rows().to_vec(),
    };

    let repeats = 100;
    let mut total = 0.0;
    for r in 0..repeats {
        total += panel(&world, &t, 32, derive_seed(seed, "tabular-m32", &[r]))?.clean_acc;
    }
    Ok(TabularDemo {
        seed,
        world,
        noise: t,
        panels,
        exact,
        m32_mean_clean_acc: total / repeats as f64,
        m32_repeats: repeats as usize,
    })
}
