//! Fully connected rectifier network with a softmax cross-entropy objective.
//!
//! Weights of layer `l` are stored row-major as `in x out`, so a forward pass
//! over a batch is a sequence of `batch x in` by `in x out` products whose
//! inner loop runs over contiguous output units.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawParams {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl TryFrom<RawParams> for MlpParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        let p = MlpParams {
            layer_sizes: r.layer_sizes,
            weights: r.weights,
            biases: r.biases,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Gradients with the same layout as [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(p: &MlpParams) -> Self {
        Self {
            weights: p.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: p.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    /// `self = decay * self + g`.
    pub(crate) fn accumulate(&mut self, g: &Gradients, decay: f64) {
        for (v, g) in self
            .weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .zip(g.weights.iter().chain(&g.biases))
        {
            v.iter_mut().zip(g).for_each(|(v, g)| *v = decay * *v + g);
        }
    }
}

/// Per-batch activation buffers, reused across steps.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    batch: usize,
    /// Post-activation outputs per layer; the last entry holds raw scores.
    outputs: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl MlpParams {
    /// He-initialized network: weights `N(0, 2 / fan_in)`, zero biases.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::invalid(format!("bad layer sizes {layer_sizes:?}")));
        }
        if *layer_sizes.last().unwrap() < 2 {
            return Err(Error::invalid("output layer needs at least 2 classes"));
        }
        let mut rng = rng::stream(seed, "mlp-init");
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let scale = (2.0 / fan_in as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        scale * z
                    })
                    .collect(),
            );
            biases.push(
                (0..fan_out)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        scale * z
                    })
                    .collect(),
            );
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    fn validate(&self) -> Result<()> {
        let n = self.layer_sizes.len();
        if n < 2 || self.weights.len() != n - 1 || self.biases.len() != n - 1 {
            return Err(Error::invalid("layer count does not match parameter arrays"));
        }
        for (l, pair) in self.layer_sizes.windows(2).enumerate() {
            if self.weights[l].len() != pair[0] * pair[1] || self.biases[l].len() != pair[1] {
                return Err(Error::invalid(format!("layer {l} parameters have the wrong shape")));
            }
        }
        if !self.is_finite() {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).flatten().all(|v| v.is_finite())
    }

    /// Parameters flattened layer by layer (weights then biases).
    pub fn flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::invalid("flat parameter vector has the wrong length"));
        }
        let mut it = values.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|v| *v = it.next().unwrap());
        }
        Ok(())
    }

    /// `params -= lr * grads`.
    pub fn apply(&mut self, grads: &Gradients, lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            w.iter_mut().zip(g).for_each(|(w, g)| *w -= lr * g);
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            b.iter_mut().zip(g).for_each(|(b, g)| *b -= lr * g);
        }
    }

    fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    fn classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Forward pass over `n` row-major inputs into `ws.outputs`.
    pub(crate) fn forward_into(&self, x: &[f64], n: usize, ws: &mut Workspace) {
        let layers = self.weights.len();
        if ws.batch != n || ws.outputs.len() != layers {
            ws.batch = n;
            ws.outputs = self.layer_sizes[1..].iter().map(|&s| vec![0.0; s * n]).collect();
        }
        for l in 0..layers {
            let (width_in, width_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let (done, rest) = ws.outputs.split_at_mut(l);
            let input: &[f64] = if l == 0 { x } else { &done[l - 1] };
            let out = &mut rest[0];
            let w = &self.weights[l];
            let b = &self.biases[l];
            for s in 0..n {
                let row = &mut out[s * width_out..(s + 1) * width_out];
                row.copy_from_slice(b);
                for (i, &a) in input[s * width_in..(s + 1) * width_in].iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    let w_row = &w[i * width_out..(i + 1) * width_out];
                    for (o, &wv) in row.iter_mut().zip(w_row) {
                        *o += a * wv;
                    }
                }
                if l + 1 < layers {
                    row.iter_mut().for_each(|v| *v = v.max(0.0));
                }
            }
        }
    }

    /// Mean softmax cross-entropy over the rows selected by `batch` (all rows
    /// when `None`), with its gradient written into `grads`.
    pub(crate) fn loss_and_grad_into(
        &self,
        ds: &LabeledDataset,
        batch: Option<&[usize]>,
        ws: &mut Workspace,
        scratch_x: &mut Vec<f64>,
        grads: &mut Gradients,
    ) -> f64 {
        let (x, labels): (&[f64], Vec<usize>) = match batch {
            None => (ds.features(), ds.labels().to_vec()),
            Some(idx) => {
                scratch_x.clear();
                for &i in idx {
                    scratch_x.extend_from_slice(ds.row(i));
                }
                (scratch_x.as_slice(), idx.iter().map(|&i| ds.labels()[i]).collect())
            }
        };
        let n = labels.len();
        self.forward_into(x, n, ws);
        let layers = self.weights.len();
        let k = self.classes();
        let inv_n = 1.0 / n as f64;

        // Output delta: (softmax - onehot) / n.
        ws.delta.resize(n * k, 0.0);
        let mut loss = 0.0;
        {
            let scores = &ws.outputs[layers - 1];
            for s in 0..n {
                let z = &scores[s * k..(s + 1) * k];
                let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum_exp: f64 = z.iter().map(|v| (v - zmax).exp()).sum();
                let log_norm = zmax + sum_exp.ln();
                loss += log_norm - z[labels[s]];
                let d = &mut ws.delta[s * k..(s + 1) * k];
                for (dj, &zj) in d.iter_mut().zip(z) {
                    *dj = (zj - log_norm).exp() * inv_n;
                }
                d[labels[s]] -= inv_n;
            }
        }
        loss *= inv_n;

        for l in (0..layers).rev() {
            let (width_in, width_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let input: &[f64] = if l == 0 { x } else { &ws.outputs[l - 1] };
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            gw.iter_mut().for_each(|v| *v = 0.0);
            gb.iter_mut().for_each(|v| *v = 0.0);
            for s in 0..n {
                let d = &ws.delta[s * width_out..(s + 1) * width_out];
                gb.iter_mut().zip(d).for_each(|(g, &dv)| *g += dv);
                for (i, &a) in input[s * width_in..(s + 1) * width_in].iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    let g_row = &mut gw[i * width_out..(i + 1) * width_out];
                    for (g, &dv) in g_row.iter_mut().zip(d) {
                        *g += a * dv;
                    }
                }
            }
            if l == 0 {
                break;
            }
            // Propagate through W^T and the rectifier of the layer below.
            let w = &self.weights[l];
            ws.delta_prev.resize(n * width_in, 0.0);
            for s in 0..n {
                let d = &ws.delta[s * width_out..(s + 1) * width_out];
                let a_row = &input[s * width_in..(s + 1) * width_in];
                let dp = &mut ws.delta_prev[s * width_in..(s + 1) * width_in];
                for i in 0..width_in {
                    dp[i] = if a_row[i] > 0.0 {
                        dot(d, &w[i * width_out..(i + 1) * width_out])
                    } else {
                        0.0
                    };
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
        }
        loss
    }

    /// Mean cross-entropy and its gradient over the whole dataset.
    pub fn loss_and_grad(&self, ds: &LabeledDataset) -> Result<(f64, Gradients)> {
        self.check_dataset(ds)?;
        let mut grads = Gradients::zeros_like(self);
        let loss = self.loss_and_grad_into(ds, None, &mut Workspace::default(), &mut Vec::new(), &mut grads);
        Ok((loss, grads))
    }

    /// Mean cross-entropy over the whole dataset.
    pub fn loss(&self, ds: &LabeledDataset) -> Result<f64> {
        self.check_dataset(ds)?;
        let mut ws = Workspace::default();
        self.forward_into(ds.features(), ds.len(), &mut ws);
        let k = self.classes();
        let scores = ws.outputs.last().unwrap();
        let total: f64 = ds
            .labels()
            .iter()
            .enumerate()
            .map(|(s, &y)| {
                let z = &scores[s * k..(s + 1) * k];
                let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln() - z[y]
            })
            .sum();
        Ok(total / ds.len() as f64)
    }

    pub(crate) fn check_dataset(&self, ds: &LabeledDataset) -> Result<()> {
        if ds.dim() != self.input_width() {
            return Err(Error::invalid(format!(
                "network expects {} features, dataset has {}",
                self.input_width(),
                ds.dim()
            )));
        }
        if ds.k() != self.classes() {
            return Err(Error::invalid(format!(
                "network has {} outputs, dataset has {} classes",
                self.classes(),
                ds.k()
            )));
        }
        Ok(())
    }

    pub(crate) fn new_gradients(&self) -> Gradients {
        Gradients::zeros_like(self)
    }

    /// Hard predictions for every row, reusing `ws`.
    pub(crate) fn predict_rows(&self, ds: &LabeledDataset, ws: &mut Workspace) -> Vec<usize> {
        self.forward_into(ds.features(), ds.len(), ws);
        let k = self.classes();
        ws.outputs.last().unwrap().chunks_exact(k).map(super::argmax).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for j in 0..4 {
            acc[j] += a[4 * c + j] * b[4 * c + j];
        }
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl Classifier for MlpParams {
    fn num_classes(&self) -> usize {
        self.classes()
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.input_width())
    }

    fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        let mut ws = Workspace::default();
        self.forward_into(x, 1, &mut ws);
        ws.outputs.pop().unwrap()
    }

    fn predict_all(&self, ds: &LabeledDataset) -> Vec<usize> {
        self.predict_rows(ds, &mut Workspace::default())
    }
}
