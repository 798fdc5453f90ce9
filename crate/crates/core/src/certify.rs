//! Certification engine: the minimum certifying margin `delta(rho)`, the
//! certified radius search, certified prediction with abstention and
//! certified-accuracy curves.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::combinatorics::{cp_lower, cp_upper};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::schemes::SelectionScheme;

pub type ClassId = u32;

/// Largest value `delta` can take; anything above 1 is uncertifiable.
pub const DELTA_CAP: f64 = 2.0;

/// What the attacker may do to the training set, each up to `rho` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PoisoningModel {
    #[serde(rename = "p1")]
    Insert,
    #[serde(rename = "p2")]
    Delete,
    #[serde(rename = "p3")]
    Modify,
    #[serde(rename = "p4")]
    InsertModify,
    #[serde(rename = "p5")]
    DeleteModify,
    #[serde(rename = "p6")]
    InsertDeleteModify,
}

impl PoisoningModel {
    pub const ALL: [PoisoningModel; 6] = [
        Self::Insert,
        Self::Delete,
        Self::Modify,
        Self::InsertModify,
        Self::DeleteModify,
        Self::InsertDeleteModify,
    ];

    /// 1-based index (`P1` ... `P6`).
    pub fn index(self) -> u8 {
        match self {
            Self::Insert => 1,
            Self::Delete => 2,
            Self::Modify => 3,
            Self::InsertModify => 4,
            Self::DeleteModify => 5,
            Self::InsertDeleteModify => 6,
        }
    }

    pub fn allows_insert(self) -> bool {
        matches!(
            self,
            Self::Insert | Self::InsertModify | Self::InsertDeleteModify
        )
    }

    pub fn allows_delete(self) -> bool {
        matches!(
            self,
            Self::Delete | Self::DeleteModify | Self::InsertDeleteModify
        )
    }

    pub fn allows_modify(self) -> bool {
        !matches!(self, Self::Insert | Self::Delete)
    }

    /// Admissible sizes `m` of the poisoned dataset.
    pub fn m_range(self, n: u64, rho: u64) -> Result<RangeInclusive<u64>> {
        if self.allows_delete() && rho > n {
            return Err(self.out_of_range(n, rho));
        }
        let lo = if self.allows_delete() { n - rho } else { n };
        let hi = if self.allows_insert() { n + rho } else { n };
        Ok(lo..=hi)
    }

    /// Size of the untouched set for a worst-case attack producing `m` samples.
    pub fn untouched(self, n: u64, m: u64, rho: u64) -> u64 {
        match self {
            Self::Insert => n,
            Self::Delete => m,
            _ => m.max(n) - rho,
        }
    }

    fn out_of_range(self, n: u64, rho: u64) -> Error {
        Error::IntensityOutOfRange {
            model: self.to_string(),
            n,
            rho,
        }
    }
}

impl fmt::Display for PoisoningModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.index())
    }
}

impl FromStr for PoisoningModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "p1" | "insert" => Self::Insert,
            "p2" | "delete" => Self::Delete,
            "p3" | "modify" => Self::Modify,
            "p4" | "insert-modify" => Self::InsertModify,
            "p5" | "delete-modify" => Self::DeleteModify,
            "p6" | "insert-delete-modify" | "any" => Self::InsertDeleteModify,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown poisoning model `{other}`"
                )))
            }
        })
    }
}

/// Minimum top-2 margin `p1 - p2` that certifies a prediction against every
/// attack of intensity `rho` on `n` training samples.
///
/// Maximises, over every admissible poisoned size `m`,
/// `miss(D_n) + miss(D'_m) / pi(n, m)`, which for all three schemes equals
/// `1 + w(m)/w(n) - 2 w(omega)/w(n)` (with the boundary terms dropped for
/// pure insertion or deletion). Clamped to `[0, 2]`.
pub fn delta(scheme: &SelectionScheme, model: PoisoningModel, n: u64, rho: u64) -> Result<f64> {
    scheme.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument(
            "training set must be nonempty".into(),
        ));
    }
    if !scheme.can_sample(n) {
        return Err(Error::SchemeSize {
            scheme: scheme.to_string(),
            n,
        });
    }
    if !model.allows_insert() && rho > n {
        return Err(model.out_of_range(n, rho));
    }
    let range = model.m_range(n, rho)?;
    if rho == 0 {
        return Ok(0.0);
    }
    if !scheme.can_sample(*range.start()) {
        // The poisoned dataset can be too small to subsample at all.
        return Ok(DELTA_CAP);
    }
    let lo = n.saturating_sub(rho).min(*range.start());
    let ladder = scheme.log_weight_ladder(n, lo, *range.end())?;
    let at = |x: u64| ladder[(x - lo) as usize];

    let mut worst = 0.0_f64;
    for m in range {
        let value = match model {
            PoisoningModel::Insert => at(m).exp_m1(),
            PoisoningModel::Delete => -at(m).exp_m1(),
            _ => at(m).exp_m1() - 2.0 * at(model.untouched(n, m, rho)).exp_m1(),
        };
        worst = worst.max(value);
    }
    Ok(worst.clamp(0.0, DELTA_CAP))
}

/// Outcome of the radius search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Radius {
    Abstain,
    Certified(u64),
}

impl Radius {
    pub fn value(self) -> Option<u64> {
        match self {
            Radius::Certified(r) => Some(r),
            Radius::Abstain => None,
        }
    }
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Radius::Abstain => f.write_str("ABSTAIN"),
            Radius::Certified(r) => write!(f, "{r}"),
        }
    }
}

/// Largest `rho <= rho_cap` with `delta(rho) <= margin`.
///
/// Exponential probing followed by bisection; relies on `delta` being
/// nondecreasing in `rho`.
pub fn certified_radius(
    scheme: &SelectionScheme,
    model: PoisoningModel,
    n: u64,
    margin: f64,
    rho_cap: u64,
) -> Result<Radius> {
    if margin.is_nan() {
        return Err(Error::InvalidArgument("margin is NaN".into()));
    }
    if margin < 0.0 {
        return Ok(Radius::Abstain);
    }
    // Deletion and modification cannot exceed the dataset.
    let cap = if model == PoisoningModel::Insert {
        rho_cap
    } else {
        rho_cap.min(n)
    };
    let certifies = |rho: u64| -> Result<bool> {
        let d = delta(scheme, model, n, rho)?;
        Ok(d <= margin && d <= 1.0)
    };
    if !certifies(0)? {
        return Ok(Radius::Abstain);
    }
    let mut good = 0u64;
    let mut probe = 1u64;
    while probe <= cap && certifies(probe)? {
        good = probe;
        probe = probe.saturating_mul(2);
    }
    let mut bad = probe.min(cap.saturating_add(1));
    while bad - good > 1 {
        let mid = good + (bad - good) / 2;
        if certifies(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(Radius::Certified(good))
}

/// Per-example vote counts over `trials` base classifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub example_id: String,
    pub counts: BTreeMap<ClassId, u64>,
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_label: Option<ClassId>,
}

impl VoteRecord {
    pub fn new(example_id: impl Into<String>, counts: BTreeMap<ClassId, u64>, trials: u64) -> Self {
        Self {
            example_id: example_id.into(),
            counts,
            trials,
            true_label: None,
        }
    }

    pub fn with_label(mut self, label: ClassId) -> Self {
        self.true_label = Some(label);
        self
    }

    fn malformed(&self, reason: impl Into<String>) -> Error {
        Error::MalformedVote {
            id: self.example_id.clone(),
            reason: reason.into(),
        }
    }

    /// Checks `sum(counts) <= trials` and, when given, class membership.
    pub fn validate(&self, classes: Option<&[ClassId]>) -> Result<()> {
        if self.trials == 0 {
            return Err(self.malformed("zero trials"));
        }
        let total: u64 = self.counts.values().sum();
        if total > self.trials {
            return Err(self.malformed(format!("{total} votes exceed {} trials", self.trials)));
        }
        if let Some(classes) = classes {
            let outside = self
                .counts
                .keys()
                .chain(self.true_label.iter())
                .find(|c| !classes.contains(c));
            if let Some(c) = outside {
                return Err(self.malformed(format!("class {c} not in the declared class set")));
            }
        }
        Ok(())
    }

    /// Classes ordered by count (descending), ties to the smaller id.
    pub fn ranked(&self) -> Vec<(ClassId, u64)> {
        let mut ranked: Vec<(ClassId, u64)> = self.counts.iter().map(|(&c, &k)| (c, k)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked
    }

    /// Majority class, if any votes were cast.
    pub fn majority(&self) -> Option<ClassId> {
        self.ranked()
            .first()
            .filter(|(_, k)| *k > 0)
            .map(|(c, _)| *c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// `None` means ABSTAIN.
    pub label: Option<ClassId>,
    pub radius: Radius,
    pub p1_lower: f64,
    pub p2_upper: f64,
}

impl Certificate {
    pub fn is_abstain(&self) -> bool {
        self.label.is_none()
    }

    pub fn margin(&self) -> f64 {
        self.p1_lower - self.p2_upper
    }
}

/// Everything needed to turn vote counts into certificates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyParams {
    /// Joint miscoverage; each bound is taken at `alpha / 2`.
    pub alpha: f64,
    pub scheme: SelectionScheme,
    pub model: PoisoningModel,
    /// Size of the potentially poisoned part of the training set.
    pub n: u64,
    pub rho_cap: u64,
}

impl CertifyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha {} not in (0, 1)",
                self.alpha
            )));
        }
        self.scheme.validate()?;
        if self.n == 0 || !self.scheme.can_sample(self.n) {
            return Err(Error::SchemeSize {
                scheme: self.scheme.to_string(),
                n: self.n,
            });
        }
        Ok(())
    }
}

/// Certified prediction with abstention.
///
/// Abstains unless the lower bound on the top class strictly exceeds the
/// upper bound on the runner-up.
pub fn certify_prediction(vote: &VoteRecord, params: &CertifyParams) -> Result<Certificate> {
    params.validate()?;
    vote.validate(None)?;
    let ranked = vote.ranked();
    let (c1, count1) = ranked.first().copied().unwrap_or((0, 0));
    let count2 = ranked.get(1).map_or(0, |&(_, k)| k);
    let alpha_half = params.alpha / 2.0;
    let p1_lower = cp_lower(count1, vote.trials, alpha_half)?;
    let p2_upper = (1.0 - p1_lower).min(cp_upper(count2, vote.trials, alpha_half)?);
    let abstain = Certificate {
        label: None,
        radius: Radius::Abstain,
        p1_lower,
        p2_upper,
    };
    if p1_lower <= p2_upper {
        return Ok(abstain);
    }
    match certified_radius(
        &params.scheme,
        params.model,
        params.n,
        p1_lower - p2_upper,
        params.rho_cap,
    )? {
        Radius::Abstain => Ok(abstain),
        radius => Ok(Certificate {
            label: Some(c1),
            radius,
            p1_lower,
            p2_upper,
        }),
    }
}

pub fn certify_batch(
    votes: &[VoteRecord],
    params: &CertifyParams,
    exec: Exec,
) -> Result<Vec<Certificate>> {
    exec.map_slice(votes, |v| certify_prediction(v, params))
        .into_iter()
        .collect()
}

fn certified_correct_at(cert: &Certificate, truth: ClassId, rho: u64) -> bool {
    cert.label == Some(truth) && matches!(cert.radius, Radius::Certified(r) if r >= rho)
}

fn labels(votes: &[VoteRecord]) -> Result<Vec<ClassId>> {
    if votes.is_empty() {
        return Err(Error::InvalidArgument("no vote records".into()));
    }
    votes
        .iter()
        .map(|v| {
            v.true_label
                .ok_or_else(|| Error::MissingLabel(v.example_id.clone()))
        })
        .collect()
}

/// Fraction of records that are certified, correct, and have radius `>= rho`.
pub fn certified_accuracy(
    votes: &[VoteRecord],
    rho: u64,
    params: &CertifyParams,
    exec: Exec,
) -> Result<f64> {
    let truth = labels(votes)?;
    let params = CertifyParams {
        rho_cap: rho,
        ..*params
    };
    let certs = certify_batch(votes, &params, exec)?;
    let hits = certs
        .iter()
        .zip(&truth)
        .filter(|(c, &t)| certified_correct_at(c, t, rho))
        .count();
    Ok(hits as f64 / votes.len() as f64)
}

/// Certified accuracy over a grid of intensities, in ascending `rho`.
pub fn accuracy_curve(
    votes: &[VoteRecord],
    rho_grid: &[u64],
    params: &CertifyParams,
    exec: Exec,
) -> Result<Vec<(u64, f64)>> {
    if rho_grid.is_empty() {
        return Err(Error::InvalidArgument("empty intensity grid".into()));
    }
    let truth = labels(votes)?;
    let mut grid = rho_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let params = CertifyParams {
        rho_cap: *grid.last().expect("nonempty"),
        ..*params
    };
    let certs = certify_batch(votes, &params, exec)?;
    Ok(grid
        .into_iter()
        .map(|rho| {
            let hits = certs
                .iter()
                .zip(&truth)
                .filter(|(c, &t)| certified_correct_at(c, t, rho))
                .count();
            (rho, hits as f64 / votes.len() as f64)
        })
        .collect())
}
