//! Ensemble training and voting.
//!
//! Each of the `T` members draws its own sub-dataset from the potentially
//! poisoned part `D^p`, adds the known-clean part `D^c`, expands the union to
//! a fixed size by inverse-class-frequency resampling, and fits a base
//! learner. Member `i` derives all of its randomness from
//! `(master_seed, i)`, so training order and thread count never change the
//! result.
//!
//! When whole classes are known clean, [`train_ensemble_case3`] builds the
//! 2-phase variant: every member only separates a virtual "clean" class from
//! the poisoned classes, and one shared classifier trained on `D^c` resolves
//! the clean classes.

mod balance;
mod dataset;
mod learner;
pub mod synthetic;

use std::collections::BTreeMap;

pub use balance::{weighted_balance_expand, DEFAULT_EXPAND_SIZE};
pub use dataset::{Dataset, Normalizer, PriorKnowledge};
pub use learner::{BaseLearnerSpec, LogisticModel, Model, NearestCentroid};

use crate::certify::{ClassId, VoteRecord};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::derive_seed;
use crate::schemes::SelectionScheme;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub scheme: SelectionScheme,
    /// Number of base classifiers `T`.
    pub trials: usize,
    pub learner: BaseLearnerSpec,
    pub expand_size: usize,
    pub master_seed: u64,
    pub exec: Exec,
}

impl TrainConfig {
    pub fn new(
        scheme: SelectionScheme,
        trials: usize,
        learner: BaseLearnerSpec,
        master_seed: u64,
    ) -> Self {
        Self {
            scheme,
            trials,
            learner,
            expand_size: DEFAULT_EXPAND_SIZE,
            master_seed,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self, poisoned_len: usize) -> Result<()> {
        self.scheme.validate()?;
        self.learner.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidArgument(
                "need at least one base classifier".into(),
            ));
        }
        if self.expand_size == 0 {
            return Err(Error::InvalidArgument(
                "expansion size must be positive".into(),
            ));
        }
        if poisoned_len == 0 || !self.scheme.can_sample(poisoned_len as u64) {
            return Err(Error::SchemeSize {
                scheme: self.scheme.to_string(),
                n: poisoned_len as u64,
            });
        }
        Ok(())
    }
}

/// Most frequent label, ties to the smaller id; `0` for an empty set.
fn most_frequent(data: &Dataset) -> ClassId {
    data.class_counts()
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(0, |(c, _)| c)
}

/// Trains one member on `combined`, whose first `poisoned_len` rows are
/// `D^p` and the rest `D^c`.
fn train_member(
    combined: &Dataset,
    poisoned_len: usize,
    config: &TrainConfig,
    fallback: ClassId,
    member: usize,
) -> Result<Model> {
    let seed = derive_seed(config.master_seed, member as u64);
    let sub = config
        .scheme
        .sample_indices(poisoned_len, derive_seed(seed, 0))?;
    if sub.is_empty() {
        return Ok(Model::Constant(fallback));
    }
    let rows: Vec<usize> = sub
        .into_iter()
        .chain(poisoned_len..combined.len())
        .collect();
    let labels: Vec<ClassId> = rows.iter().map(|&i| combined.label(i)).collect();
    let expanded: Vec<usize> =
        weighted_balance_expand(&labels, config.expand_size, derive_seed(seed, 1))?
            .into_iter()
            .map(|j| rows[j])
            .collect();
    Ok(config
        .learner
        .fit(combined, &expanded, derive_seed(seed, 2)))
}

fn check_dims(poisoned: &Dataset, clean: &Dataset) -> Result<()> {
    if !clean.is_empty() && clean.dim() != poisoned.dim() {
        return Err(Error::DimensionMismatch {
            expected: poisoned.dim(),
            found: clean.dim(),
        });
    }
    Ok(())
}

/// Anything that casts `T` votes per input.
pub trait Voter: Sync {
    fn dim(&self) -> usize;
    fn trials(&self) -> usize;
    fn normalize(&self, x: &[f64]) -> Vec<f64>;
    /// Prediction of member `i` on an already-normalised input.
    fn member_vote(&self, i: usize, x: &[f64]) -> ClassId;

    fn tally(&self, x: &[f64]) -> BTreeMap<ClassId, u64> {
        let mut counts = BTreeMap::new();
        for i in 0..self.trials() {
            *counts.entry(self.member_vote(i, x)).or_default() += 1;
        }
        counts
    }

    /// Majority prediction on a raw input, ties to the smaller class id.
    fn predict(&self, x: &[f64]) -> Option<ClassId> {
        let counts = self.tally(&self.normalize(x));
        counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c)
    }
}

/// Flat ensemble (cases 1 and 2).
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    normalizer: Normalizer,
    members: Vec<Model>,
    num_classes: u32,
}

impl Ensemble {
    pub fn from_parts(normalizer: Normalizer, members: Vec<Model>, num_classes: u32) -> Self {
        Self {
            normalizer,
            members,
            num_classes,
        }
    }

    pub fn members(&self) -> &[Model] {
        &self.members
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }
}

impl Voter for Ensemble {
    fn dim(&self) -> usize {
        self.normalizer.dim()
    }

    fn trials(&self) -> usize {
        self.members.len()
    }

    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        self.normalizer.apply(x)
    }

    fn member_vote(&self, i: usize, x: &[f64]) -> ClassId {
        self.members[i].predict(x)
    }
}

/// Trains `T` members on balanced expansions of `mu(D^p) ∪ D^c`.
pub fn train_ensemble_case12(
    poisoned: &Dataset,
    clean: &Dataset,
    config: &TrainConfig,
) -> Result<Ensemble> {
    config.validate(poisoned.len())?;
    check_dims(poisoned, clean)?;
    let raw = poisoned.concat(clean)?;
    let normalizer = Normalizer::fit(&raw);
    let combined = normalizer.apply_all(&raw);
    let fallback = most_frequent(clean);
    let members = config.exec.try_map_range(config.trials, |i| {
        train_member(&combined, poisoned.len(), config, fallback, i)
    })?;
    Ok(Ensemble {
        normalizer,
        members,
        num_classes: raw.num_classes(),
    })
}

/// 2-phase ensemble (case 3).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhaseEnsemble {
    normalizer: Normalizer,
    /// Output `0` is the virtual clean class; `l > 0` is `poisoned_classes[l-1]`.
    phase_one: Vec<Model>,
    /// Output `j` is `clean_classes[j]`.
    phase_two: Model,
    clean_classes: Vec<ClassId>,
    poisoned_classes: Vec<ClassId>,
    num_classes: u32,
}

impl TwoPhaseEnsemble {
    pub fn clean_classes(&self) -> &[ClassId] {
        &self.clean_classes
    }

    pub fn poisoned_classes(&self) -> &[ClassId] {
        &self.poisoned_classes
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    /// First-phase output of member `i`: `None` for the virtual clean class.
    pub fn phase_one_vote(&self, i: usize, x: &[f64]) -> Option<ClassId> {
        match self.phase_one[i].predict(x) {
            0 => None,
            l => Some(self.poisoned_classes[l as usize - 1]),
        }
    }

    /// Shared second-phase prediction among the clean classes.
    pub fn phase_two(&self, x: &[f64]) -> ClassId {
        self.clean_classes[self.phase_two.predict(x) as usize]
    }
}

impl Voter for TwoPhaseEnsemble {
    fn dim(&self) -> usize {
        self.normalizer.dim()
    }

    fn trials(&self) -> usize {
        self.phase_one.len()
    }

    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        self.normalizer.apply(x)
    }

    fn member_vote(&self, i: usize, x: &[f64]) -> ClassId {
        self.phase_one_vote(i, x)
            .unwrap_or_else(|| self.phase_two(x))
    }

    fn tally(&self, x: &[f64]) -> BTreeMap<ClassId, u64> {
        let mut counts = BTreeMap::new();
        let mut clean_votes = 0;
        for i in 0..self.trials() {
            match self.phase_one_vote(i, x) {
                Some(c) => *counts.entry(c).or_default() += 1,
                None => clean_votes += 1,
            }
        }
        if clean_votes > 0 {
            *counts.entry(self.phase_two(x)).or_default() += clean_votes;
        }
        counts
    }
}

/// Trains the 2-phase ensemble: `T` first-phase members on
/// `mu(D^p) ∪ D^c` with `D^c` relabelled to one virtual class, plus one
/// second-phase classifier on `D^c` alone.
pub fn train_ensemble_case3(
    poisoned: &Dataset,
    clean: &Dataset,
    clean_classes: &[ClassId],
    config: &TrainConfig,
) -> Result<TwoPhaseEnsemble> {
    config.validate(poisoned.len())?;
    check_dims(poisoned, clean)?;
    let num_classes = poisoned.num_classes().max(clean.num_classes());
    dataset::validate_clean_classes(clean_classes, num_classes)?;
    if clean.is_empty() {
        return Err(Error::PriorKnowledge(
            "no clean samples for the second phase".into(),
        ));
    }
    if let Some(c) = clean.labels().iter().find(|c| !clean_classes.contains(c)) {
        return Err(Error::PriorKnowledge(format!(
            "clean part contains class {c}, which is not declared clean"
        )));
    }
    if let Some(c) = poisoned.labels().iter().find(|c| clean_classes.contains(c)) {
        return Err(Error::PriorKnowledge(format!(
            "poisoned part contains clean class {c}"
        )));
    }
    let mut clean_sorted = clean_classes.to_vec();
    clean_sorted.sort_unstable();
    let poisoned_classes: Vec<ClassId> = (0..num_classes)
        .filter(|c| !clean_sorted.contains(c))
        .collect();

    let raw = poisoned.concat(clean)?;
    let normalizer = Normalizer::fit(&raw);
    let combined = normalizer.apply_all(&raw);

    let phase_one_data = combined.relabel(1 + poisoned_classes.len() as u32, |c| {
        poisoned_classes
            .iter()
            .position(|&p| p == c)
            .map_or(0, |j| j as ClassId + 1)
    })?;
    let phase_one = config.exec.try_map_range(config.trials, |i| {
        train_member(&phase_one_data, poisoned.len(), config, 0, i)
    })?;

    let clean_norm = normalizer.apply_all(clean);
    let phase_two_data = clean_norm.relabel(clean_sorted.len() as u32, |c| {
        clean_sorted
            .iter()
            .position(|&k| k == c)
            .expect("validated") as ClassId
    })?;
    let seed = derive_seed(config.master_seed, u64::MAX);
    let expanded = weighted_balance_expand(
        phase_two_data.labels(),
        config.expand_size,
        derive_seed(seed, 1),
    )?;
    let phase_two = config
        .learner
        .fit(&phase_two_data, &expanded, derive_seed(seed, 2));

    Ok(TwoPhaseEnsemble {
        normalizer,
        phase_one,
        phase_two,
        clean_classes: clean_sorted,
        poisoned_classes,
        num_classes,
    })
}

/// One vote record per test example; each record sums to `T`.
pub fn predict_votes<V: Voter>(
    ensemble: &V,
    test: &Dataset,
    exec: Exec,
) -> Result<Vec<VoteRecord>> {
    if test.dim() != ensemble.dim() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.dim(),
            found: test.dim(),
        });
    }
    let trials = ensemble.trials() as u64;
    Ok(exec.map_range(test.len(), |i| {
        let x = ensemble.normalize(test.row(i));
        VoteRecord {
            example_id: test.id(i).to_string(),
            counts: ensemble.tally(&x),
            trials,
            true_label: Some(test.label(i)),
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_ensemble(votes: &[ClassId]) -> Ensemble {
        Ensemble::from_parts(
            Normalizer::fit(
                &Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![0, 0], 3, "n").unwrap(),
            ),
            votes.iter().map(|&c| Model::Constant(c)).collect(),
            3,
        )
    }

    fn one_point() -> Dataset {
        Dataset::from_rows(&[vec![0.5]], vec![0], 3, "q").unwrap()
    }

    #[test]
    fn counts_member_votes() {
        let e = constant_ensemble(&[0, 0, 1]);
        let v = predict_votes(&e, &one_point(), Exec::Sequential).unwrap();
        assert_eq!(v[0].counts, BTreeMap::from([(0, 2), (1, 1)]));
        assert_eq!(v[0].majority(), Some(0));
        assert_eq!(e.predict(&[0.5]), Some(0));
    }

    #[test]
    fn tie_goes_to_smaller_class() {
        let e = constant_ensemble(&[2, 1]);
        let v = predict_votes(&e, &one_point(), Exec::Sequential).unwrap();
        assert_eq!(v[0].majority(), Some(1));
        assert_eq!(e.predict(&[0.5]), Some(1));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let e = constant_ensemble(&[0]);
        let wide = Dataset::from_rows(&[vec![0.5, 0.5]], vec![0], 3, "w").unwrap();
        assert!(predict_votes(&e, &wide, Exec::Sequential).is_err());
    }

    #[test]
    fn empty_binomial_draw_uses_clean_majority() {
        let poisoned = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![0, 1], 3, "p").unwrap();
        let clean =
            Dataset::from_rows(&[vec![5.0], vec![6.0], vec![7.0]], vec![2, 2, 1], 3, "c").unwrap();
        let mut config = TrainConfig::new(
            SelectionScheme::Binomial { p: 1e-9 },
            4,
            BaseLearnerSpec::NearestCentroid,
            1,
        );
        config.expand_size = 16;
        let e = train_ensemble_case12(&poisoned, &clean, &config).unwrap();
        assert!(e.members().iter().all(|m| *m == Model::Constant(2)));
        let e = train_ensemble_case12(&poisoned, &one_point().select(&[]), &config).unwrap();
        assert!(e.members().iter().all(|m| *m == Model::Constant(0)));
    }

    #[test]
    fn case3_preconditions() {
        let poisoned = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![2, 2], 3, "p").unwrap();
        let clean = Dataset::from_rows(&[vec![5.0], vec![6.0]], vec![0, 1], 3, "c").unwrap();
        let config = TrainConfig::new(
            SelectionScheme::WithReplacement { n_s: 1 },
            2,
            BaseLearnerSpec::NearestCentroid,
            1,
        );
        assert!(train_ensemble_case3(&poisoned, &clean, &[0, 1], &config).is_ok());
        assert!(train_ensemble_case3(&poisoned, &clean, &[0], &config).is_err());
        assert!(train_ensemble_case3(&poisoned, &clean, &[0, 1, 2], &config).is_err());
        assert!(train_ensemble_case3(&clean, &poisoned, &[0, 1], &config).is_err());
    }

    #[test]
    fn two_phase_member_composition() {
        let poisoned = Dataset::from_rows(&[vec![10.0], vec![11.0]], vec![2, 2], 3, "p").unwrap();
        let clean = Dataset::from_rows(
            &[vec![0.0], vec![1.0], vec![4.0], vec![5.0]],
            vec![0, 0, 1, 1],
            3,
            "c",
        )
        .unwrap();
        let config = TrainConfig::new(
            SelectionScheme::WithReplacement { n_s: 2 },
            3,
            BaseLearnerSpec::NearestCentroid,
            5,
        );
        let e = train_ensemble_case3(&poisoned, &clean, &[0, 1], &config).unwrap();
        let far = e.normalize(&[10.5]);
        for i in 0..3 {
            // A poisoned-class first phase decides the member regardless of phase two.
            assert_eq!(e.phase_one_vote(i, &far), Some(2));
            assert_eq!(e.member_vote(i, &far), 2);
        }
        let near = e.normalize(&[4.2]);
        for i in 0..3 {
            assert_eq!(e.phase_one_vote(i, &near), None);
            assert_eq!(e.member_vote(i, &near), e.phase_two(&near));
            assert_eq!(e.phase_two(&near), 1);
        }
    }
}
