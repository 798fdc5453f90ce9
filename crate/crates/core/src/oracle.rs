//! Exact brute-force checks of the certification math on tiny instances.
//!
//! Sub-datasets are enumerated exhaustively and every probability is an
//! exact rational. Nothing here calls the closed forms in [`crate::certify`];
//! only [`SelectionScheme::subset_mass`] and, for the `pi` check, the
//! scheme's own `pi_ratio` are shared.
//!
//! Attacks are canonicalised: deleted samples are the first indices of
//! `D_n`, modified ones come next, and replacements plus insertions get
//! fresh ids `n, n+1, ...`. The schemes are permutation-invariant, so any
//! other placement gives identical escape masses ([`placement_spot_check`]
//! confirms this on small `n`).

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::certify::{delta, PoisoningModel};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::schemes::SelectionScheme;

pub const MAX_N: u64 = 8;
pub const MAX_RHO: u64 = 3;
/// Upper bound on enumerated sub-datasets per instance.
pub const MAX_CONFIGS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TinyInstance {
    pub n: u64,
    pub scheme: SelectionScheme,
    pub model: PoisoningModel,
    pub rho: u64,
}

impl fmt::Display for TinyInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} n={} rho={}",
            self.scheme, self.model, self.n, self.rho
        )
    }
}

/// One canonical attack: how many samples were inserted, deleted, modified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Attack {
    pub inserted: u64,
    pub deleted: u64,
    pub modified: u64,
}

impl Attack {
    pub fn poisoned_size(&self, n: u64) -> u64 {
        n + self.inserted - self.deleted
    }

    pub fn untouched(&self, n: u64) -> u64 {
        n - self.deleted - self.modified
    }
}

/// Every attack an adversary of the given model can mount with budget `rho`.
pub fn attacks(model: PoisoningModel, n: u64, rho: u64) -> Vec<Attack> {
    let mut out = Vec::new();
    let cap = |allowed: bool| if allowed { rho } else { 0 };
    for inserted in 0..=cap(model.allows_insert()) {
        for deleted in 0..=cap(model.allows_delete()) {
            for modified in 0..=cap(model.allows_modify()) {
                if inserted + deleted + modified <= rho && deleted + modified <= n {
                    out.push(Attack {
                        inserted,
                        deleted,
                        modified,
                    });
                }
            }
        }
    }
    out
}

fn support_size(scheme: &SelectionScheme, n: u64) -> u64 {
    match *scheme {
        SelectionScheme::WithoutReplacement { n_s } => crate::schemes::binomial_exact(n, n_s)
            .to_u64()
            .unwrap_or(u64::MAX),
        SelectionScheme::WithReplacement { n_s } => {
            crate::schemes::binomial_exact(n + n_s - 1, n_s)
                .to_u64()
                .unwrap_or(u64::MAX)
        }
        SelectionScheme::Binomial { .. } => 1u64.checked_shl(n as u32).unwrap_or(u64::MAX),
    }
}

impl TinyInstance {
    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.n == 0 || self.n > MAX_N {
            return Err(Error::CapExceeded(format!(
                "n={} outside 1..={MAX_N}",
                self.n
            )));
        }
        if self.rho > MAX_RHO {
            return Err(Error::CapExceeded(format!(
                "rho={} exceeds {MAX_RHO}",
                self.rho
            )));
        }
        if self.rho > self.n {
            return Err(Error::InvalidArgument(format!(
                "rho={} exceeds n={}",
                self.rho, self.n
            )));
        }
        let largest = support_size(&self.scheme, self.n + self.rho);
        if largest > MAX_CONFIGS {
            return Err(Error::CapExceeded(format!(
                "{largest} sub-datasets exceed the enumeration cap {MAX_CONFIGS}"
            )));
        }
        if !self.scheme.can_sample(self.n) {
            return Err(Error::SchemeSize {
                scheme: self.scheme.to_string(),
                n: self.n,
            });
        }
        Ok(())
    }
}

/// All sub-datasets with possibly nonzero mass, as position lists into a
/// dataset of size `size`.
fn support(scheme: &SelectionScheme, size: usize) -> Vec<Vec<usize>> {
    match *scheme {
        SelectionScheme::WithoutReplacement { n_s } => {
            let mut out = Vec::new();
            combinations(size, n_s as usize, 0, &mut Vec::new(), &mut out);
            out
        }
        SelectionScheme::WithReplacement { n_s } => {
            let mut out = Vec::new();
            multisets(size, n_s as usize, 0, &mut Vec::new(), &mut out);
            out
        }
        SelectionScheme::Binomial { .. } => (0u64..1 << size)
            .map(|bits| (0..size).filter(|&i| bits >> i & 1 == 1).collect())
            .collect(),
    }
}

fn combinations(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        combinations(n, k, i + 1, cur, out);
        cur.pop();
    }
}

fn multisets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        multisets(n, k, i, cur, out);
        cur.pop();
    }
}

/// A concrete clean / poisoned dataset pair, as global sample ids.
struct Placement {
    clean: Vec<usize>,
    poisoned: Vec<usize>,
    untouched: Vec<bool>,
}

impl Placement {
    fn canonical(n: u64, attack: &Attack) -> Self {
        let n = n as usize;
        let removed = (attack.deleted + attack.modified) as usize;
        let fresh = (attack.inserted + attack.modified) as usize;
        Self::new(n, (0..removed).collect(), fresh)
    }

    /// `removed` lists the ids of `D_n` that are deleted or modified.
    fn new(n: usize, removed: Vec<usize>, fresh: usize) -> Self {
        let clean: Vec<usize> = (0..n).collect();
        let mut untouched = vec![true; n + fresh];
        for &r in &removed {
            untouched[r] = false;
        }
        for flag in untouched.iter_mut().skip(n) {
            *flag = false;
        }
        let poisoned = (0..n)
            .filter(|i| !removed.contains(i))
            .chain(n..n + fresh)
            .collect();
        Self {
            clean,
            poisoned,
            untouched,
        }
    }

    fn inside(&self, members: &[usize], positions: &[usize]) -> bool {
        positions.iter().all(|&p| self.untouched[members[p]])
    }
}

/// Escape masses and exact `pi` range for one placement.
struct Masses {
    /// Mass of `D_n` draws not inside the untouched set.
    clean_escape: BigRational,
    /// Mass of `D'_m` draws not inside the untouched set.
    poisoned_escape: BigRational,
    /// `(min, max)` of `Pr(D'_m -> S) / Pr(D_n -> S)` over inside `S`.
    pi: Option<(BigRational, BigRational)>,
}

fn masses(scheme: &SelectionScheme, place: &Placement) -> Result<Masses> {
    let n = place.clean.len();
    let m = place.poisoned.len();
    let mut clean_escape = BigRational::zero();
    let mut pi: Option<(BigRational, BigRational)> = None;
    for sub in support(scheme, n) {
        let mass = scheme.subset_mass(n as u64, &sub)?;
        if place.inside(&place.clean, &sub) {
            if mass.is_zero() {
                continue;
            }
            // Same samples, located by position in D'_m.
            let ids: Vec<usize> = sub.iter().map(|&p| place.clean[p]).collect();
            let positions: Vec<usize> = ids
                .iter()
                .map(|id| {
                    place
                        .poisoned
                        .iter()
                        .position(|x| x == id)
                        .expect("untouched")
                })
                .collect();
            let ratio = scheme.subset_mass(m as u64, &positions)? / &mass;
            pi = Some(match pi {
                None => (ratio.clone(), ratio),
                Some((lo, hi)) => (lo.min(ratio.clone()), hi.max(ratio)),
            });
        } else {
            clean_escape += mass;
        }
    }
    let mut poisoned_escape = BigRational::zero();
    for sub in support(scheme, m) {
        if !place.inside(&place.poisoned, &sub) {
            poisoned_escape += scheme.subset_mass(m as u64, &sub)?;
        }
    }
    Ok(Masses {
        clean_escape,
        poisoned_escape,
        pi,
    })
}

fn cap_value() -> BigRational {
    BigRational::from_integer(BigInt::from(2))
}

/// `miss(D_n) + miss(D'_m) / pi` for one placement, capped at 2.
fn placement_value(scheme: &SelectionScheme, place: &Placement) -> Result<BigRational> {
    if !scheme.can_sample(place.poisoned.len() as u64) {
        return Ok(cap_value());
    }
    let ms = masses(scheme, place)?;
    let value = match ms.pi {
        // No sub-dataset survives the attack: nothing can be certified.
        None => cap_value(),
        Some((lo, hi)) => {
            if lo != hi {
                return Err(Error::InvalidArgument(format!(
                    "{scheme} has no single pi for this attack"
                )));
            }
            ms.clean_escape + ms.poisoned_escape / lo
        }
    };
    Ok(value.min(cap_value()))
}

/// Exact `delta(rho)`: the worst escape value over every admissible attack.
pub fn enumerate_delta_exact(instance: &TinyInstance) -> Result<BigRational> {
    instance.validate()?;
    let mut worst = BigRational::zero();
    for attack in attacks(instance.model, instance.n, instance.rho) {
        let place = Placement::canonical(instance.n, &attack);
        worst = worst.max(placement_value(&instance.scheme, &place)?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiReport {
    pub ok: bool,
    pub checked: usize,
    pub failures: Vec<String>,
}

/// Checks that the scheme's `pi` makes both bounds hold with equality for
/// every sub-dataset of the untouched samples, under every attack.
pub fn verify_pi_bounds(instance: &TinyInstance) -> Result<PiReport> {
    verify_pi_bounds_with(instance, false)
}

/// As [`verify_pi_bounds`]; `perturb` inflates `pi` by 1% whenever `m > n`
/// to exercise the failure path.
pub fn verify_pi_bounds_with(instance: &TinyInstance, perturb: bool) -> Result<PiReport> {
    instance.validate()?;
    let scheme = instance.scheme;
    let n = instance.n;
    let mut report = PiReport {
        ok: true,
        checked: 0,
        failures: Vec::new(),
    };
    for attack in attacks(instance.model, n, instance.rho) {
        let m = attack.poisoned_size(n);
        let Some(mut pi) = scheme.pi_ratio_exact(n, m) else {
            continue;
        };
        let float = scheme.pi_ratio(n, m)?;
        let exact_f = pi.to_f64().unwrap_or(f64::NAN);
        if (float - exact_f).abs() > 1e-12 * exact_f.abs().max(1.0) {
            report.ok = false;
            report.failures.push(format!(
                "{instance} m={m}: floating pi {float} differs from exact {exact_f}"
            ));
        }
        if perturb && m > n {
            pi *= BigRational::new(101.into(), 100.into());
        }
        let place = Placement::canonical(n, &attack);
        for sub in support(&scheme, n as usize) {
            if !place.inside(&place.clean, &sub) {
                continue;
            }
            let clean_mass = scheme.subset_mass(n, &sub)?;
            let positions: Vec<usize> = sub
                .iter()
                .map(|&p| {
                    place
                        .poisoned
                        .iter()
                        .position(|&x| x == place.clean[p])
                        .unwrap()
                })
                .collect();
            let poisoned_mass = scheme.subset_mass(m, &positions)?;
            report.checked += 1;
            let scaled = &pi * &clean_mass;
            if scaled != poisoned_mass {
                report.ok = false;
                report.failures.push(format!(
                    "{instance} m={m} S={sub:?}: pi*Pr(D_n)={scaled} but Pr(D'_m)={poisoned_mass}"
                ));
            }
        }
    }
    Ok(report)
}

/// Distribution of the adversarial base classifier's output on one kind of
/// sub-dataset: probabilities of the top class, the runner-up, and "other".
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputMix {
    pub top: String,
    pub runner_up: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub attack: Attack,
    pub poisoned_size: u64,
    pub untouched: u64,
    /// Clean-dataset probabilities of the top two classes.
    pub p1: String,
    pub p2: String,
    /// The same probabilities after the attack.
    pub p1_poisoned: String,
    pub p2_poisoned: String,
    /// Output on draws that contain a removed sample.
    pub on_removed: OutputMix,
    /// Output on draws inside the untouched set.
    pub on_untouched: OutputMix,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "insert {} / delete {} / modify {} (m={}, |omega|={}): p1-p2 = {} - {} before, \
             {} vs {} after",
            self.attack.inserted,
            self.attack.deleted,
            self.attack.modified,
            self.poisoned_size,
            self.untouched,
            self.p1,
            self.p2,
            self.p1_poisoned,
            self.p2_poisoned
        )
    }
}

/// Split `diff` in `[-1, 1]` into `(P(top), P(runner-up))` with that difference.
fn split(diff: &BigRational) -> (BigRational, BigRational) {
    if diff.is_negative() {
        (BigRational::zero(), -diff.clone())
    } else {
        (diff.clone(), BigRational::zero())
    }
}

/// Searches attacks for a base classifier whose clean top-2 margin is exactly
/// `margin` but whose poisoned smoothed prediction is the runner-up.
///
/// The classifier follows the equality cases of the robustness bound: it
/// favours the top class on draws containing removed samples, votes
/// runner-up on draws containing injected samples, and on untouched draws
/// takes whatever mix makes the clean margin exact.
pub fn tightness_witness(instance: &TinyInstance, margin: &BigRational) -> Result<Option<Witness>> {
    instance.validate()?;
    if margin.is_negative() {
        return Err(Error::InvalidArgument("margin must be nonnegative".into()));
    }
    if *margin > BigRational::one() {
        return Ok(None);
    }
    let scheme = instance.scheme;
    let n = instance.n;
    let one = BigRational::one();
    for attack in attacks(instance.model, n, instance.rho) {
        let place = Placement::canonical(n, &attack);
        let m = place.poisoned.len() as u64;
        let zero_str = BigRational::zero().to_string();
        if !scheme.can_sample(m) {
            // The poisoned set cannot even be subsampled.
            return Ok(Some(Witness {
                attack,
                poisoned_size: m,
                untouched: attack.untouched(n),
                p1: zero_str.clone(),
                p2: zero_str.clone(),
                p1_poisoned: zero_str.clone(),
                p2_poisoned: zero_str.clone(),
                on_removed: OutputMix {
                    top: zero_str.clone(),
                    runner_up: zero_str.clone(),
                },
                on_untouched: OutputMix {
                    top: zero_str.clone(),
                    runner_up: zero_str,
                },
            }));
        }
        let clean_support = support(&scheme, n as usize);
        let mut escape = BigRational::zero();
        for sub in &clean_support {
            if !place.inside(&place.clean, sub) {
                escape += scheme.subset_mass(n, sub)?;
            }
        }
        let (removed_diff, inside_diff) = if escape == one {
            (margin.clone(), BigRational::zero())
        } else {
            let w = (margin - &escape) / (&one - &escape);
            if w >= -one.clone() {
                (one.clone(), w)
            } else {
                ((margin + &one - &escape) / &escape, -one.clone())
            }
        };
        let (rem_top, rem_run) = split(&removed_diff);
        let (in_top, in_run) = split(&inside_diff);

        let mut p1 = BigRational::zero();
        let mut p2 = BigRational::zero();
        for sub in &clean_support {
            let mass = scheme.subset_mass(n, sub)?;
            let (t, r) = if place.inside(&place.clean, sub) {
                (&in_top, &in_run)
            } else {
                (&rem_top, &rem_run)
            };
            p1 += &mass * t;
            p2 += &mass * r;
        }
        let mut q1 = BigRational::zero();
        let mut q2 = BigRational::zero();
        for sub in support(&scheme, m as usize) {
            let mass = scheme.subset_mass(m, &sub)?;
            if place.inside(&place.poisoned, &sub) {
                q1 += &mass * &in_top;
                q2 += &mass * &in_run;
            } else {
                q2 += mass;
            }
        }
        debug_assert_eq!(&p1 - &p2, *margin);
        if q2 > q1 {
            return Ok(Some(Witness {
                attack,
                poisoned_size: m,
                untouched: attack.untouched(n),
                p1: p1.to_string(),
                p2: p2.to_string(),
                p1_poisoned: q1.to_string(),
                p2_poisoned: q2.to_string(),
                on_removed: OutputMix {
                    top: rem_top.to_string(),
                    runner_up: rem_run.to_string(),
                },
                on_untouched: OutputMix {
                    top: in_top.to_string(),
                    runner_up: in_run.to_string(),
                },
            }));
        }
    }
    Ok(None)
}

/// Compares canonical-prefix escape masses with every explicit choice of
/// removed samples. Returns the number of placements checked.
pub fn placement_spot_check(instance: &TinyInstance) -> Result<usize> {
    instance.validate()?;
    let scheme = instance.scheme;
    let n = instance.n as usize;
    let mut checked = 0;
    for attack in attacks(instance.model, instance.n, instance.rho) {
        if !scheme.can_sample(attack.poisoned_size(instance.n)) {
            continue;
        }
        let canon = masses(&scheme, &Placement::canonical(instance.n, &attack))?;
        let removed = (attack.deleted + attack.modified) as usize;
        let fresh = (attack.inserted + attack.modified) as usize;
        let mut choices = Vec::new();
        combinations(n, removed, 0, &mut Vec::new(), &mut choices);
        for removed_ids in choices {
            let other = masses(&scheme, &Placement::new(n, removed_ids.clone(), fresh))?;
            if other.clean_escape != canon.clean_escape
                || other.poisoned_escape != canon.poisoned_escape
                || other.pi != canon.pi
            {
                return Err(Error::InvalidArgument(format!(
                    "{} {:?}: placement {removed_ids:?} differs from canonical",
                    instance, attack
                )));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Grid bounds for [`run_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCaps {
    pub min_n: u64,
    pub max_n: u64,
    pub max_rho: u64,
    pub max_ns: u64,
}

impl Default for GridCaps {
    fn default() -> Self {
        Self {
            min_n: 3,
            max_n: 7,
            max_rho: 2,
            max_ns: 3,
        }
    }
}

impl GridCaps {
    pub fn validate(&self) -> Result<()> {
        if self.max_n > MAX_N || self.max_rho > MAX_RHO || self.max_ns > 4 {
            return Err(Error::CapExceeded(format!(
                "grid caps n<={}, rho<={}, n_s<={} exceed n<={MAX_N}, rho<={MAX_RHO}, n_s<=4",
                self.max_n, self.max_rho, self.max_ns
            )));
        }
        if self.min_n == 0 || self.min_n > self.max_n || self.max_ns == 0 {
            return Err(Error::InvalidArgument("empty oracle grid".into()));
        }
        if self.max_rho > self.min_n || self.max_ns > self.min_n {
            return Err(Error::InvalidArgument(
                "rho and n_s caps must not exceed the smallest n".into(),
            ));
        }
        Ok(())
    }

    pub fn instances(&self) -> Vec<TinyInstance> {
        let mut out = Vec::new();
        for n in self.min_n..=self.max_n {
            let mut schemes = Vec::new();
            for n_s in 1..=self.max_ns {
                schemes.push(SelectionScheme::WithoutReplacement { n_s });
                schemes.push(SelectionScheme::WithReplacement { n_s });
            }
            schemes.push(SelectionScheme::Binomial { p: 0.25 });
            schemes.push(SelectionScheme::Binomial { p: 0.5 });
            for scheme in schemes {
                for model in PoisoningModel::ALL {
                    for rho in 0..=self.max_rho {
                        out.push(TinyInstance {
                            n,
                            scheme,
                            model,
                            rho,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridEntry {
    pub instance: String,
    pub delta_closed: f64,
    pub delta_exact: String,
    pub abs_error: f64,
    pub delta_ok: bool,
    pub pi_ok: bool,
    pub tight_ok: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub caps: GridCaps,
    pub tolerance: f64,
    pub instances: usize,
    pub delta_failures: usize,
    pub pi_failures: usize,
    pub tightness_failures: usize,
    pub max_abs_error: f64,
    pub entries: Vec<GridEntry>,
}

impl GridReport {
    pub fn passed(&self) -> bool {
        self.delta_failures == 0 && self.pi_failures == 0 && self.tightness_failures == 0
    }
}

/// Closed-form vs exact tolerance on the grid.
pub const GRID_TOLERANCE: f64 = 1e-9;

fn check_instance(instance: &TinyInstance, perturb_pi: bool) -> Result<GridEntry> {
    let exact = enumerate_delta_exact(instance)?;
    let closed = delta(&instance.scheme, instance.model, instance.n, instance.rho)?;
    let exact_f = exact.to_f64().unwrap_or(f64::NAN);
    let abs_error = (closed - exact_f).abs();
    let mut notes = Vec::new();

    let pi = verify_pi_bounds_with(instance, perturb_pi)?;
    notes.extend(pi.failures.iter().take(3).cloned());

    let one = BigRational::one();
    let mut tight_ok = true;
    if exact <= one {
        if let Some(w) = tightness_witness(instance, &exact)? {
            tight_ok = false;
            notes.push(format!("attack at margin = delta: {w}"));
        }
        if exact.is_positive() {
            let step = BigRational::new(1.into(), 1000.into());
            let below = if exact > step {
                &exact - step
            } else {
                BigRational::zero()
            };
            if tightness_witness(instance, &below)?.is_none() {
                tight_ok = false;
                notes.push(format!("no attack at margin {below} < delta"));
            }
        }
    } else if tightness_witness(instance, &one)?.is_none() {
        tight_ok = false;
        notes.push("delta > 1 but no attack at margin 1".into());
    }

    Ok(GridEntry {
        instance: instance.to_string(),
        delta_closed: closed,
        delta_exact: exact.to_string(),
        abs_error,
        delta_ok: abs_error <= GRID_TOLERANCE,
        pi_ok: pi.ok,
        tight_ok,
        notes,
    })
}

/// Runs every oracle check over the grid.
pub fn run_grid(caps: &GridCaps, perturb_pi: bool, exec: Exec) -> Result<GridReport> {
    caps.validate()?;
    let instances = caps.instances();
    let entries: Vec<GridEntry> = exec
        .map_slice(&instances, |inst| check_instance(inst, perturb_pi))
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(GridReport {
        caps: *caps,
        tolerance: GRID_TOLERANCE,
        instances: entries.len(),
        delta_failures: entries.iter().filter(|e| !e.delta_ok).count(),
        pi_failures: entries.iter().filter(|e| !e.pi_ok).count(),
        tightness_failures: entries.iter().filter(|e| !e.tight_ok).count(),
        max_abs_error: entries.iter().map(|e| e.abs_error).fold(0.0, f64::max),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use PoisoningModel::*;

    fn r(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn inst(scheme: SelectionScheme, model: PoisoningModel, n: u64, rho: u64) -> TinyInstance {
        TinyInstance {
            n,
            scheme,
            model,
            rho,
        }
    }

    const WR2: SelectionScheme = SelectionScheme::WithReplacement { n_s: 2 };
    const WOR2: SelectionScheme = SelectionScheme::WithoutReplacement { n_s: 2 };

    #[test]
    fn exact_delta_examples() {
        assert_eq!(
            enumerate_delta_exact(&inst(WR2, Modify, 4, 1)).unwrap(),
            r(7, 8)
        );
        assert_eq!(
            enumerate_delta_exact(&inst(WOR2, Modify, 4, 1)).unwrap(),
            r(1, 1)
        );
        assert_eq!(
            enumerate_delta_exact(&inst(WR2, Insert, 4, 1)).unwrap(),
            r(9, 16)
        );
        assert_eq!(
            enumerate_delta_exact(&inst(WR2, Delete, 4, 1)).unwrap(),
            r(7, 16)
        );
        for model in PoisoningModel::ALL {
            assert!(enumerate_delta_exact(&inst(WR2, model, 5, 0))
                .unwrap()
                .is_zero());
        }
    }

    #[test]
    fn caps_are_enforced() {
        assert!(matches!(
            enumerate_delta_exact(&inst(WR2, Modify, 9, 1)),
            Err(Error::CapExceeded(_))
        ));
        assert!(matches!(
            enumerate_delta_exact(&inst(WR2, Modify, 5, 4)),
            Err(Error::CapExceeded(_))
        ));
    }

    #[test]
    fn pi_bounds_hold_on_five_samples() {
        for scheme in [WOR2, WR2, SelectionScheme::Binomial { p: 0.5 }] {
            let report = verify_pi_bounds(&inst(scheme, InsertDeleteModify, 5, 2)).unwrap();
            assert!(report.ok, "{:?}", report.failures);
            assert!(report.checked > 0);
            let same = verify_pi_bounds(&inst(scheme, Modify, 5, 0)).unwrap();
            assert!(same.ok);
        }
    }

    #[test]
    fn perturbed_pi_is_caught() {
        let report = verify_pi_bounds_with(&inst(WR2, InsertDeleteModify, 5, 2), true).unwrap();
        assert!(!report.ok);
    }

    #[test]
    fn tightness_boundary() {
        let i = inst(WR2, Modify, 4, 1);
        let d = enumerate_delta_exact(&i).unwrap();
        assert!(tightness_witness(&i, &d).unwrap().is_none());
        let below = &d - r(1, 1000);
        let w = tightness_witness(&i, &below)
            .unwrap()
            .expect("attack below delta");
        assert_eq!(w.attack.modified, 1);
        let zero = inst(WR2, InsertDeleteModify, 4, 0);
        assert!(tightness_witness(&zero, &r(0, 1)).unwrap().is_none());
        assert!(tightness_witness(&zero, &r(1, 2)).unwrap().is_none());
    }

    #[test]
    fn canonical_placement_is_representative() {
        for scheme in [WOR2, WR2, SelectionScheme::Binomial { p: 0.25 }] {
            for model in PoisoningModel::ALL {
                let checked = placement_spot_check(&inst(scheme, model, 4, 2)).unwrap();
                assert!(checked > 0);
            }
        }
    }

    #[test]
    fn attack_enumeration_respects_model() {
        assert!(attacks(Insert, 4, 2)
            .iter()
            .all(|a| a.deleted == 0 && a.modified == 0));
        assert_eq!(attacks(InsertDeleteModify, 4, 1).len(), 4);
        assert_eq!(attacks(Modify, 4, 2).len(), 3);
    }
}
