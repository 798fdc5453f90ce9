use rand::Rng;
use rand_distr::StandardNormal;

use crate::certify::ClassId;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

use super::dataset::Dataset;

/// Isotropic unit-variance Gaussian blobs. With `classes <= dim`, class `c`
/// sits at `separation / sqrt(2)` on axis `c` (every pair of centres is
/// `separation` apart); otherwise centres are spaced `separation` apart along
/// the first axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub classes: u32,
    pub n: usize,
    pub dim: usize,
    pub separation: f64,
    pub seed: u64,
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.n == 0 || self.dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "blobs need classes, n and dim positive (got {}, {}, {})",
                self.classes, self.n, self.dim
            )));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "separation {} must be finite and nonnegative",
                self.separation
            )));
        }
        Ok(())
    }
}

/// Samples are labelled round-robin, so class sizes differ by at most one.
pub fn gaussian_blobs(spec: &BlobSpec, id_prefix: &str) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let simplex = spec.classes as usize <= spec.dim;
    let mut features = Vec::with_capacity(spec.n * spec.dim);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let c = (i % spec.classes as usize) as ClassId;
        for j in 0..spec.dim {
            let noise: f64 = rng.sample(StandardNormal);
            let centre = match (simplex, j) {
                (true, j) if j == c as usize => spec.separation / std::f64::consts::SQRT_2,
                (false, 0) => c as f64 * spec.separation,
                _ => 0.0,
            };
            features.push(centre + noise);
        }
        labels.push(c);
    }
    let ids = (0..spec.n).map(|i| format!("{id_prefix}{i}")).collect();
    Dataset::new(features, spec.dim, labels, ids, spec.classes)
}
