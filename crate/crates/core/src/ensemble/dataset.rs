use std::collections::BTreeMap;

use crate::certify::ClassId;
use crate::error::{Error, Result};

/// Row-major feature matrix with labels over `num_classes` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    dim: usize,
    labels: Vec<ClassId>,
    ids: Vec<String>,
    num_classes: u32,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        dim: usize,
        labels: Vec<ClassId>,
        ids: Vec<String>,
        num_classes: u32,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "feature dimension must be positive".into(),
            ));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                found: features.len(),
            });
        }
        if ids.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} ids for {} samples",
                ids.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&c| c >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside 0..{num_classes}"
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            dim,
            labels,
            ids,
            num_classes,
        })
    }

    /// Builds a dataset with ids `"{prefix}{row}"`.
    pub fn from_rows(
        rows: &[Vec<f64>],
        labels: Vec<ClassId>,
        num_classes: u32,
        prefix: &str,
    ) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        let ids = (0..rows.len()).map(|i| format!("{prefix}{i}")).collect();
        Self::new(rows.concat(), dim, labels, ids, num_classes)
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

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> ClassId {
        self.labels[i]
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn class_counts(&self) -> BTreeMap<ClassId, usize> {
        let mut counts = BTreeMap::new();
        for &c in &self.labels {
            *counts.entry(c).or_default() += 1;
        }
        counts
    }

    /// Rows at `indices` (repeats allowed), in order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            features,
            dim: self.dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            num_classes: self.num_classes,
        }
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if other.is_empty() {
            return Ok(self.clone());
        }
        if self.is_empty() {
            return Ok(other.clone());
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut out = self.clone();
        out.features.extend_from_slice(&other.features);
        out.labels.extend_from_slice(&other.labels);
        out.ids.extend(other.ids.iter().cloned());
        out.num_classes = self.num_classes.max(other.num_classes);
        Ok(out)
    }

    /// Same samples with labels rewritten through `map` into `num_classes`.
    pub fn relabel(&self, num_classes: u32, map: impl Fn(ClassId) -> ClassId) -> Result<Self> {
        Self::new(
            self.features.clone(),
            self.dim,
            self.labels.iter().map(|&c| map(c)).collect(),
            self.ids.clone(),
            num_classes,
        )
    }

    /// Overwrites the label of sample `i`.
    pub fn set_label(&mut self, i: usize, label: ClassId) -> Result<()> {
        if label >= self.num_classes {
            return Err(Error::InvalidArgument(format!(
                "label {label} outside 0..{}",
                self.num_classes
            )));
        }
        self.labels[i] = label;
        Ok(())
    }

    pub(crate) fn map_features(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut features = Vec::with_capacity(self.features.len());
        for i in 0..self.len() {
            features.extend(f(self.row(i)));
        }
        Self {
            features,
            ..self.clone()
        }
    }
}

/// Per-dimension min-max scaling to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    min: Vec<f64>,
    span: Vec<f64>,
}

impl Normalizer {
    pub fn fit(data: &Dataset) -> Self {
        let d = data.dim();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for i in 0..data.len() {
            for (j, &x) in data.row(i).iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        let span = min
            .iter()
            .zip(&max)
            .map(|(lo, hi)| if hi > lo { hi - lo } else { 1.0 })
            .collect();
        for m in &mut min {
            if !m.is_finite() {
                *m = 0.0;
            }
        }
        Self { min, span }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.span))
            .map(|(v, (lo, s))| (v - lo) / s)
            .collect()
    }

    pub fn apply_all(&self, data: &Dataset) -> Dataset {
        data.map_features(|x| self.apply(x))
    }
}

/// What the defender knows to be clean.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorKnowledge {
    /// Every training sample may be poisoned.
    Case1,
    /// These sample indices are known clean.
    Case2 { clean: Vec<usize> },
    /// Every sample of these classes is known clean.
    Case3 { clean_classes: Vec<ClassId> },
}

impl PriorKnowledge {
    /// Splits `data` into `(potentially poisoned, clean)`.
    pub fn split(&self, data: &Dataset) -> Result<(Dataset, Dataset)> {
        let n = data.len();
        let clean_mask: Vec<bool> = match self {
            PriorKnowledge::Case1 => vec![false; n],
            PriorKnowledge::Case2 { clean } => {
                let mut mask = vec![false; n];
                for &i in clean {
                    if i >= n {
                        return Err(Error::PriorKnowledge(format!(
                            "clean index {i} out of range for {n} samples"
                        )));
                    }
                    if mask[i] {
                        return Err(Error::PriorKnowledge(format!("clean index {i} repeated")));
                    }
                    mask[i] = true;
                }
                mask
            }
            PriorKnowledge::Case3 { clean_classes } => {
                validate_clean_classes(clean_classes, data.num_classes())?;
                data.labels()
                    .iter()
                    .map(|c| clean_classes.contains(c))
                    .collect()
            }
        };
        let poisoned: Vec<usize> = (0..n).filter(|&i| !clean_mask[i]).collect();
        let clean: Vec<usize> = (0..n).filter(|&i| clean_mask[i]).collect();
        if poisoned.is_empty() {
            return Err(Error::PriorKnowledge(
                "no potentially poisoned samples remain".into(),
            ));
        }
        Ok((data.select(&poisoned), data.select(&clean)))
    }
}

pub(crate) fn validate_clean_classes(clean: &[ClassId], num_classes: u32) -> Result<()> {
    if clean.is_empty() {
        return Err(Error::PriorKnowledge("clean class set is empty".into()));
    }
    if let Some(c) = clean.iter().find(|&&c| c >= num_classes) {
        return Err(Error::PriorKnowledge(format!(
            "clean class {c} does not exist"
        )));
    }
    let mut sorted = clean.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != clean.len() {
        return Err(Error::PriorKnowledge("clean classes repeated".into()));
    }
    if sorted.len() as u32 >= num_classes {
        return Err(Error::PriorKnowledge(
            "clean classes must be a strict subset of all classes".into(),
        ));
    }
    Ok(())
}
