//! Built-in base learners. The certificate does not depend on what the base
//! classifier is, so small deterministic learners stand in for deep nets.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::certify::ClassId;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

use super::dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseLearnerSpec {
    NearestCentroid,
    /// Multinomial logistic regression fitted by plain SGD from zero weights.
    LogisticRegression {
        epochs: usize,
        learning_rate: f64,
        l2: f64,
    },
}

impl Default for BaseLearnerSpec {
    fn default() -> Self {
        Self::LogisticRegression {
            epochs: 5,
            learning_rate: 0.5,
            l2: 1e-4,
        }
    }
}

impl BaseLearnerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::NearestCentroid => Ok(()),
            Self::LogisticRegression {
                epochs,
                learning_rate,
                l2,
            } => {
                let rate_ok = learning_rate.is_finite() && learning_rate > 0.0;
                if epochs == 0 || !rate_ok || l2.is_nan() || l2 < 0.0 {
                    Err(Error::InvalidArgument(format!(
                        "logistic regression needs epochs > 0, learning_rate > 0, l2 >= 0 \
                         (got {epochs}, {learning_rate}, {l2})"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Fits on `rows` of `data` (repeats allowed, order is the SGD order
    /// before per-epoch shuffling).
    pub fn fit(&self, data: &Dataset, rows: &[usize], seed: u64) -> Model {
        match *self {
            Self::NearestCentroid => Model::Centroids(NearestCentroid::fit(data, rows)),
            Self::LogisticRegression {
                epochs,
                learning_rate,
                l2,
            } => Model::Logistic(LogisticModel::fit(
                data,
                rows,
                epochs,
                learning_rate,
                l2,
                seed,
            )),
        }
    }
}

/// A trained base classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Constant(ClassId),
    Centroids(NearestCentroid),
    Logistic(LogisticModel),
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> ClassId {
        match self {
            Model::Constant(c) => *c,
            Model::Centroids(m) => m.predict(x),
            Model::Logistic(m) => m.predict(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearestCentroid {
    classes: Vec<ClassId>,
    centroids: Vec<Vec<f64>>,
}

impl NearestCentroid {
    fn fit(data: &Dataset, rows: &[usize]) -> Self {
        let d = data.dim();
        let k = data.num_classes() as usize;
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for &i in rows {
            let c = data.label(i) as usize;
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(data.row(i)) {
                *s += x;
            }
        }
        let mut classes = Vec::new();
        let mut centroids = Vec::new();
        for (c, (sum, count)) in sums.into_iter().zip(counts).enumerate() {
            if count > 0 {
                classes.push(c as ClassId);
                centroids.push(sum.into_iter().map(|s| s / count as f64).collect());
            }
        }
        Self { classes, centroids }
    }

    fn predict(&self, x: &[f64]) -> ClassId {
        let mut best = (f64::INFINITY, 0);
        for (c, centroid) in self.classes.iter().zip(&self.centroids) {
            let dist: f64 = centroid.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best.0 {
                best = (dist, *c);
            }
        }
        best.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    dim: usize,
    /// `num_classes x (dim + 1)`, bias last.
    weights: Vec<Vec<f64>>,
}

impl LogisticModel {
    fn fit(data: &Dataset, rows: &[usize], epochs: usize, lr: f64, l2: f64, seed: u64) -> Self {
        let d = data.dim();
        let k = data.num_classes() as usize;
        let mut weights = vec![vec![0.0; d + 1]; k];
        let mut order = rows.to_vec();
        let mut rng = rng_from_seed(seed);
        let mut probs = vec![0.0; k];
        for epoch in 0..epochs {
            order.shuffle(&mut rng);
            let step = lr / (1.0 + epoch as f64);
            for &i in &order {
                let x = data.row(i);
                softmax_into(&weights, x, &mut probs);
                let y = data.label(i) as usize;
                for (c, w) in weights.iter_mut().enumerate() {
                    let g = probs[c] - if c == y { 1.0 } else { 0.0 };
                    for (wj, xj) in w.iter_mut().zip(x) {
                        *wj -= step * (g * xj + l2 * *wj);
                    }
                    w[d] -= step * g;
                }
            }
        }
        Self { dim: d, weights }
    }

    fn predict(&self, x: &[f64]) -> ClassId {
        let mut best = (f64::NEG_INFINITY, 0);
        for (c, w) in self.weights.iter().enumerate() {
            let z = logit(w, x, self.dim);
            if z > best.0 {
                best = (z, c as ClassId);
            }
        }
        best.1
    }
}

fn logit(w: &[f64], x: &[f64], d: usize) -> f64 {
    w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d]
}

fn softmax_into(weights: &[Vec<f64>], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (o, w) in out.iter_mut().zip(weights) {
        *o = logit(w, x, d);
    }
    let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}
