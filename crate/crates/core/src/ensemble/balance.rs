use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::certify::ClassId;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Default expanded training-set size.
pub const DEFAULT_EXPAND_SIZE: usize = 2048;

/// Draws `target_size` positions into `labels` with replacement, each
/// sample weighted by the inverse frequency of its class, so every class
/// present is drawn equally often in expectation.
pub fn weighted_balance_expand(
    labels: &[ClassId],
    target_size: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot balance an empty subset".into(),
        ));
    }
    if target_size == 0 {
        return Err(Error::InvalidArgument(
            "expansion size must be positive".into(),
        ));
    }
    let mut counts: BTreeMap<ClassId, usize> = BTreeMap::new();
    for &c in labels {
        *counts.entry(c).or_default() += 1;
    }
    let weights = labels.iter().map(|c| 1.0 / counts[c] as f64);
    let dist = WeightedIndex::new(weights)
        .map_err(|e| Error::InvalidArgument(format!("balance weights: {e}")))?;
    let mut rng = rng_from_seed(seed);
    Ok((0..target_size).map(|_| dist.sample(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_only_from_subset() {
        let labels = [0, 0, 0, 1];
        let drawn = weighted_balance_expand(&labels, 8, 3).unwrap();
        assert_eq!(drawn.len(), 8);
        assert!(drawn.iter().all(|&i| i < 4));
        assert_eq!(drawn, weighted_balance_expand(&labels, 8, 3).unwrap());
    }

    #[test]
    fn single_class_spreads_over_its_samples() {
        let drawn = weighted_balance_expand(&[5, 5, 5], 300, 1).unwrap();
        for i in 0..3 {
            let k = drawn.iter().filter(|&&j| j == i).count();
            assert!(k > 60, "sample {i} drawn {k} times");
        }
    }

    #[test]
    fn classes_balance_in_the_limit() {
        let labels = [0, 0, 0, 1];
        let drawn = weighted_balance_expand(&labels, 10_000, 11).unwrap();
        let ones = drawn.iter().filter(|&&i| labels[i] == 1).count() as f64 / 10_000.0;
        assert!((ones - 0.5).abs() <= 0.02, "{ones}");
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(weighted_balance_expand(&[], 4, 0).is_err());
        assert!(weighted_balance_expand(&[0], 0, 0).is_err());
    }
}
