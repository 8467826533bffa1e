//! Datasets: finite labeled samples, exact discrete distributions, the
//! synthetic generators, and the CSV on-disk format.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{check_k, ClassPrior, TransitionMatrix};
use crate::rng::{self, Categorical};

/// Default jitter for [`make_circles`].
pub const CIRCLES_SIGMA: f64 = 0.08;
/// Default jitter for [`make_moons`].
pub const MOONS_SIGMA: f64 = 0.1;
pub const CIRCLES_OUTER_RADIUS: f64 = 1.0;
pub const CIRCLES_INNER_RADIUS: f64 = 0.5;

/// A finite sample `{(x_i, y_i)}` with features stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    k: usize,
}

impl LabeledDataset {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("a dataset needs k >= 2"));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::invalid(format!(
                "{} feature values do not form {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= k) {
            return Err(Error::invalid(format!("label {y} out of range for k = {k}")));
        }
        Ok(Self {
            dim,
            features,
            labels,
            k,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, k: usize) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("ragged feature rows"));
        }
        Self::new(dim, rows.concat(), labels, k)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    /// Same features, new labels.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::invalid("label count does not match the dataset"));
        }
        Self::new(self.dim, self.features.clone(), labels, self.k)
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            k: self.k,
        }
    }

    /// Fraction of samples in each class.
    pub fn class_frequencies(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.k];
        for &y in &self.labels {
            counts[y] += 1;
        }
        let n = self.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }

    /// Header `x0,...,x{d-1},label`, features in scientific notation with 17
    /// significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for j in 0..self.dim {
            let _ = write!(out, "x{j},");
        }
        out.push_str("label\n");
        for (x, y) in self.rows().zip(&self.labels) {
            for v in x {
                let _ = write!(out, "{v:.16e},");
            }
            let _ = writeln!(out, "{y}");
        }
        out
    }

    /// Parses the CSV format. When `k` is `None` the class count is
    /// `max(label) + 1`, at least 2.
    pub fn from_csv_str(text: &str, k: Option<usize>) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.last() != Some(&"label") {
            return Err(Error::Parse("last CSV column must be `label`".into()));
        }
        let dim = cols.len() - 1;
        for (j, c) in cols[..dim].iter().enumerate() {
            if *c != format!("x{j}") {
                return Err(Error::Parse(format!("unexpected column `{c}`, expected `x{j}`")));
            }
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (ln, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse(format!("row {}: expected {} fields", ln + 1, dim + 1)));
            }
            for f in &fields[..dim] {
                features.push(
                    f.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {}: `{f}`: {e}", ln + 1)))?,
                );
            }
            labels.push(
                fields[dim]
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("row {}: label: {e}", ln + 1)))?,
            );
        }
        let k = k.unwrap_or_else(|| labels.iter().max().map_or(2, |&m| (m + 1).max(2)));
        Self::new(dim, features, labels, k)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>, k: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, k)
    }
}

/// A joint distribution over a finite feature set with a deterministic true
/// label per point. Paired with a [`TransitionMatrix`] it also describes the
/// noisy distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct DiscreteDistribution {
    k: usize,
    points: Vec<Vec<f64>>,
    point_probs: Vec<f64>,
    true_label: Vec<usize>,
}

#[derive(Deserialize)]
struct RawDistribution {
    k: usize,
    points: Vec<Vec<f64>>,
    point_probs: Vec<f64>,
    true_label: Vec<usize>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = Error;

    fn try_from(r: RawDistribution) -> Result<Self> {
        Self::new(r.points, r.point_probs, r.true_label, r.k)
    }
}

impl DiscreteDistribution {
    pub fn new(points: Vec<Vec<f64>>, point_probs: Vec<f64>, true_label: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("need k >= 2"));
        }
        if points.is_empty() || points.len() != point_probs.len() || points.len() != true_label.len() {
            return Err(Error::invalid(
                "points, probabilities and labels must be nonempty and equally long",
            ));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("support points have differing dimensions"));
        }
        if point_probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::invalid("point probabilities must be nonnegative"));
        }
        let sum: f64 = point_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("point probabilities sum to {sum}")));
        }
        if let Some(&y) = true_label.iter().find(|&&y| y >= k) {
            return Err(Error::invalid(format!("label {y} out of range for k = {k}")));
        }
        let mut seen = std::collections::HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            let key: Vec<u64> = p.iter().map(|v| (v + 0.0).to_bits()).collect();
            if let Some(j) = seen.insert(key, i) {
                return Err(Error::invalid(format!("support points {j} and {i} coincide")));
            }
        }
        Ok(Self {
            k,
            points,
            point_probs,
            true_label,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point_probs(&self) -> &[f64] {
        &self.point_probs
    }

    pub fn true_labels(&self) -> &[usize] {
        &self.true_label
    }

    /// Index of the support point equal to `x`.
    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        self.points.iter().position(|p| p.as_slice() == x)
    }

    /// Marginal class probabilities `Pr[Y = i]`.
    pub fn prior(&self) -> Result<ClassPrior> {
        let mut probs = vec![0.0; self.k];
        for (p, &y) in self.point_probs.iter().zip(&self.true_label) {
            probs[y] += p;
        }
        ClassPrior::new(probs)
    }

    /// Every support point once with its true label.
    pub fn support_dataset(&self) -> LabeledDataset {
        LabeledDataset::from_rows(&self.points, self.true_label.clone(), self.k).expect("validated support")
    }

    /// Draws `m` support-point indices and a noisy label for each.
    pub(crate) fn sample_indices(&self, m: usize, t: &TransitionMatrix, rng: &mut rng::Rng) -> Vec<(usize, usize)> {
        let points = Categorical::new(&self.point_probs);
        let rows = t.samplers();
        self.sample_indices_with(m, &points, &rows, rng)
    }

    pub(crate) fn sample_indices_with(
        &self,
        m: usize,
        points: &Categorical,
        rows: &[Categorical],
        rng: &mut rng::Rng,
    ) -> Vec<(usize, usize)> {
        (0..m)
            .map(|_| {
                let x = points.sample(rng);
                (x, rows[self.true_label[x]].sample(rng))
            })
            .collect()
    }
}

/// The 8-point two-class world: `(1,±2), (2,±2), (1,±1), (2,±1)`, uniform
/// mass, class 0 above the horizontal axis.
pub fn tabular_world() -> DiscreteDistribution {
    let mut points = Vec::with_capacity(8);
    let mut labels = Vec::with_capacity(8);
    for &y in &[2.0, -2.0, 1.0, -1.0] {
        for &x in &[1.0, 2.0] {
            points.push(vec![x, y]);
            labels.push(if y > 0.0 { 0 } else { 1 });
        }
    }
    DiscreteDistribution::new(points, vec![0.125; 8], labels, 2).expect("static world is valid")
}

/// The tabular world with every support point replaced by a cluster of
/// `per_point` distinct points (offsets below 0.5 along the first axis), all
/// carrying the original label. Mass stays uniform.
pub fn tabular_world_refined(per_point: usize) -> DiscreteDistribution {
    let base = tabular_world();
    let n = base.len() * per_point.max(1);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (p, &y) in base.points().iter().zip(base.true_labels()) {
        for r in 0..per_point.max(1) {
            points.push(vec![p[0] + r as f64 / (2 * per_point.max(1)) as f64, p[1]]);
            labels.push(y);
        }
    }
    let mass = 1.0 / n as f64;
    let mut probs = vec![mass; n];
    // Absorb rounding so the total is exactly representable as 1 within 1e-12.
    let drift = 1.0 - probs.iter().sum::<f64>();
    probs[0] += drift;
    DiscreteDistribution::new(points, probs, labels, base.k()).expect("refined world is valid")
}

/// Noise-free point on the circles of class `class`.
pub fn circles_point(class: usize, theta: f64) -> [f64; 2] {
    let r = if class == 0 {
        CIRCLES_OUTER_RADIUS
    } else {
        CIRCLES_INNER_RADIUS
    };
    [r * theta.cos(), r * theta.sin()]
}

/// Noise-free point on the moon of class `class`, `theta` in `[0, pi]`.
pub fn moons_point(class: usize, theta: f64) -> [f64; 2] {
    if class == 0 {
        [theta.cos(), theta.sin()]
    } else {
        [1.0 - theta.cos(), 0.5 - theta.sin()]
    }
}

fn make_two_class(
    m: usize,
    noise_sigma: f64,
    seed: u64,
    tag: &str,
    theta_max: f64,
    point: fn(usize, f64) -> [f64; 2],
) -> Result<LabeledDataset> {
    if m < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {m}")));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "noise sigma {noise_sigma} must be finite and >= 0"
        )));
    }
    let mut rng = rng::stream(seed, tag);
    let jitter = Normal::new(0.0, noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut labels: Vec<usize> = (0..m).map(|i| usize::from(i >= m / 2)).collect();
    labels.shuffle(&mut rng);
    let mut features = Vec::with_capacity(2 * m);
    for &y in &labels {
        let theta = rng.random::<f64>() * theta_max;
        let [a, b] = point(y, theta);
        if noise_sigma > 0.0 {
            features.push(a + jitter.sample(&mut rng));
            features.push(b + jitter.sample(&mut rng));
        } else {
            features.push(a);
            features.push(b);
        }
    }
    LabeledDataset::new(2, features, labels, 2)
}

/// Two concentric circles (class 0 outer, radius 1.0; class 1 inner, radius
/// 0.5) with isotropic Gaussian jitter. Exactly `floor(m/2)` class-0 samples.
pub fn make_circles(m: usize, noise_sigma: f64, seed: u64) -> Result<LabeledDataset> {
    make_two_class(m, noise_sigma, seed, "circles", 2.0 * PI, circles_point)
}

/// Two interleaving half circles with isotropic Gaussian jitter.
pub fn make_moons(m: usize, noise_sigma: f64, seed: u64) -> Result<LabeledDataset> {
    make_two_class(m, noise_sigma, seed, "moons", PI, moons_point)
}

/// `m` i.i.d. draws of `X` from `d`, each with a noisy label drawn from `T[y(X)]`.
pub fn sample_iid(d: &DiscreteDistribution, m: usize, t: &TransitionMatrix, seed: u64) -> Result<LabeledDataset> {
    check_k(d.k(), t.k(), "sample_iid")?;
    let mut rng = rng::stream(seed, "sample-iid");
    let draws = d.sample_indices(m, t, &mut rng);
    let mut features = Vec::with_capacity(m * d.dim());
    let mut labels = Vec::with_capacity(m);
    for (x, y) in draws {
        features.extend_from_slice(&d.points()[x]);
        labels.push(y);
    }
    LabeledDataset::new(d.dim(), features, labels, d.k())
}

/// Every support point exactly once, in support order, each with a noisy
/// label drawn from `T[y(x)]`.
pub fn stratified_sample(d: &DiscreteDistribution, t: &TransitionMatrix, seed: u64) -> Result<LabeledDataset> {
    check_k(d.k(), t.k(), "stratified_sample")?;
    let labels = crate::noise::corrupt_labels(d.true_labels(), t, rng::derive_seed(seed, "stratified", &[]))?;
    LabeledDataset::from_rows(d.points(), labels, d.k())
}

/// Random partition into `(train, validation)` with `round(m * (1 - f))`
/// training rows.
pub fn split(ds: &LabeledDataset, val_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "validation fraction {val_fraction} outside (0, 1)"
        )));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut rng::stream(seed, "split"));
    let n_train = (ds.len() as f64 * (1.0 - val_fraction)).round() as usize;
    Ok((ds.subset(&idx[..n_train]), ds.subset(&idx[n_train..])))
}
