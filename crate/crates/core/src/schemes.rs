//! The three random selection schemes.
//!
//! All closed forms reduce to a single per-scheme "size weight" `w(x)`, the
//! reciprocal of the probability of one fixed sub-dataset when sampling from
//! `x` samples (up to a factor shared by every dataset size):
//!
//! | scheme               | `w(x)`        |
//! |----------------------|---------------|
//! | without replacement  | `C(x, n_s)`   |
//! | with replacement     | `x^n_s`       |
//! | binomial             | `(1-p)^(-x)`  |
//!
//! so that `pi(n, m) = w(n) / w(m)` and the probability that a draw from `N`
//! samples escapes a fixed `omega`-subset is `1 - w(omega) / w(N)`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::log_binomial_ratio;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Largest dataset size accepted by the exact-arithmetic helpers.
pub const EXACT_CAP: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SelectionScheme {
    /// Uniform `n_s`-subset.
    WithoutReplacement { n_s: u64 },
    /// `n_s` independent uniform draws.
    WithReplacement { n_s: u64 },
    /// Each sample kept independently with probability `p`.
    Binomial { p: f64 },
}

impl fmt::Display for SelectionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WithoutReplacement { n_s } => write!(f, "without-replacement(n_s={n_s})"),
            Self::WithReplacement { n_s } => write!(f, "with-replacement(n_s={n_s})"),
            Self::Binomial { p } => write!(f, "binomial(p={p})"),
        }
    }
}

impl SelectionScheme {
    /// Binomial selection with the same expected size as an `n_s`-bag of `n`.
    pub fn binomial_for_size(n_s: u64, n: u64) -> Result<Self> {
        if n == 0 || n_s == 0 || n_s >= n {
            return Err(Error::InvalidArgument(format!(
                "binomial selection needs 0 < n_s < n, got n_s={n_s}, n={n}"
            )));
        }
        Ok(Self::Binomial {
            p: n_s as f64 / n as f64,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::WithoutReplacement { n_s } | Self::WithReplacement { n_s } if n_s == 0 => Err(
                Error::InvalidArgument("selection size n_s must be positive".into()),
            ),
            Self::Binomial { p } if !(p > 0.0 && p < 1.0) => Err(Error::InvalidArgument(format!(
                "binomial selection probability {p} not in (0, 1)"
            ))),
            _ => Ok(()),
        }
    }

    /// Whether a sub-dataset can be drawn from `n` samples at all.
    pub fn can_sample(&self, n: u64) -> bool {
        match *self {
            Self::WithoutReplacement { n_s } => n >= n_s,
            Self::WithReplacement { .. } => n >= 1,
            Self::Binomial { .. } => true,
        }
    }

    fn size_error(&self, n: u64) -> Error {
        Error::SchemeSize {
            scheme: self.to_string(),
            n,
        }
    }

    /// Draw one sub-dataset of `0..n`, returned sorted (a multiset for
    /// bagging with replacement).
    pub fn sample_indices(&self, n: usize, seed: u64) -> Result<Vec<usize>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidArgument(
                "cannot sample from an empty dataset".into(),
            ));
        }
        let mut rng = rng_from_seed(seed);
        let mut out = match *self {
            Self::WithoutReplacement { n_s } => {
                if n_s as usize > n {
                    return Err(self.size_error(n as u64));
                }
                index::sample(&mut rng, n, n_s as usize).into_vec()
            }
            Self::WithReplacement { n_s } => (0..n_s).map(|_| rng.random_range(0..n)).collect(),
            Self::Binomial { p } => (0..n).filter(|_| rng.random::<f64>() < p).collect(),
        };
        out.sort_unstable();
        Ok(out)
    }

    /// `ln(w(x) / w(n))`.
    pub fn log_weight_ratio(&self, x: u64, n: u64) -> Result<f64> {
        self.validate()?;
        match *self {
            Self::WithoutReplacement { n_s } => {
                log_binomial_ratio(x, n, n_s).map_err(|_| self.size_error(n))
            }
            Self::WithReplacement { n_s } => {
                if n == 0 {
                    return Err(self.size_error(n));
                }
                if x == 0 {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(n_s as f64 * (x as f64 / n as f64).ln())
            }
            Self::Binomial { p } => Ok((n as f64 - x as f64) * (-p).ln_1p()),
        }
    }

    /// `ln(w(x) / w(n))` for every `x` in `lo..=hi`.
    ///
    /// Bagging without replacement walks outward from `n` one factor at a
    /// time instead of re-forming each `n_s`-term product.
    pub fn log_weight_ladder(&self, n: u64, lo: u64, hi: u64) -> Result<Vec<f64>> {
        self.validate()?;
        if lo > n || hi < n {
            return Err(Error::InvalidArgument(format!(
                "ladder [{lo}, {hi}] must contain the reference size {n}"
            )));
        }
        match *self {
            Self::WithoutReplacement { n_s } => {
                if n < n_s {
                    return Err(self.size_error(n));
                }
                let len = (hi - lo + 1) as usize;
                let mut out = vec![f64::NEG_INFINITY; len];
                let base = (n - lo) as usize;
                out[base] = 0.0;
                let k = n_s as f64;
                for x in n..hi {
                    // C(x+1, k) / C(x, k) = (x+1) / (x+1-k)
                    let i = (x - lo) as usize;
                    out[i + 1] = out[i] - (-k / (x + 1) as f64).ln_1p();
                }
                let mut x = n;
                while x > lo && x > n_s {
                    // C(x-1, k) / C(x, k) = (x-k) / x
                    let i = (x - lo) as usize;
                    out[i - 1] = out[i] + (-k / x as f64).ln_1p();
                    x -= 1;
                }
                Ok(out)
            }
            _ => (lo..=hi).map(|x| self.log_weight_ratio(x, n)).collect(),
        }
    }

    /// The constant `pi` with `pi * Pr(mu(D_n) = S) = Pr(mu(D'_m) = S)` for
    /// every sub-dataset `S` of the untouched samples.
    pub fn pi_ratio(&self, n: u64, m: u64) -> Result<f64> {
        if !self.can_sample(m) || !self.can_sample(n) {
            return Err(self.size_error(m.min(n)));
        }
        Ok((-self.log_weight_ratio(m, n)?).exp())
    }

    /// Probability that a draw from `n_total` samples is not contained in a
    /// fixed subset of `omega_size` of them.
    pub fn miss_probability(&self, n_total: u64, omega_size: u64) -> Result<f64> {
        if omega_size > n_total {
            return Err(Error::InvalidArgument(format!(
                "untouched set of {omega_size} exceeds dataset of {n_total}"
            )));
        }
        if !self.can_sample(n_total) {
            return Err(self.size_error(n_total));
        }
        Ok(-self.log_weight_ratio(omega_size, n_total)?.exp_m1())
    }

    /// Exact `p` for the binomial scheme.
    fn exact_p(p: f64) -> BigRational {
        BigRational::from_float(p).expect("validated probability is finite")
    }

    /// Exact probability of drawing `subset` (a sorted or unsorted multiset of
    /// indices into `0..n`).
    pub fn subset_mass(&self, n: u64, subset: &[usize]) -> Result<BigRational> {
        self.validate()?;
        if n > EXACT_CAP {
            return Err(Error::CapExceeded(format!(
                "exact masses are limited to n <= {EXACT_CAP}, got {n}"
            )));
        }
        if let Some(&bad) = subset.iter().find(|&&i| i as u64 >= n) {
            return Err(Error::InvalidArgument(format!(
                "index {bad} out of range for n={n}"
            )));
        }
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        for &i in subset {
            *counts.entry(i).or_default() += 1;
        }
        let distinct = counts.values().all(|&c| c == 1);
        let size = subset.len() as u64;
        let zero = BigRational::zero();
        Ok(match *self {
            Self::WithoutReplacement { n_s } => {
                if size != n_s || !distinct || n < n_s {
                    zero
                } else {
                    BigRational::new(BigInt::one(), binomial_exact(n, n_s))
                }
            }
            Self::WithReplacement { n_s } => {
                if size != n_s {
                    zero
                } else {
                    let mut arrangements = factorial_exact(n_s);
                    for &c in counts.values() {
                        arrangements /= factorial_exact(c);
                    }
                    BigRational::new(arrangements, BigInt::from(n).pow(n_s as u32))
                }
            }
            Self::Binomial { p } => {
                if !distinct {
                    zero
                } else {
                    let p = Self::exact_p(p);
                    let q = BigRational::one() - &p;
                    pow_exact(&p, size as i64) * pow_exact(&q, (n - size) as i64)
                }
            }
        })
    }

    /// Exact counterpart of [`pi_ratio`](Self::pi_ratio); `None` when either
    /// dataset cannot be sampled.
    pub fn pi_ratio_exact(&self, n: u64, m: u64) -> Option<BigRational> {
        if !self.can_sample(n) || !self.can_sample(m) {
            return None;
        }
        Some(match *self {
            Self::WithoutReplacement { n_s } => {
                BigRational::new(binomial_exact(n, n_s), binomial_exact(m, n_s))
            }
            Self::WithReplacement { n_s } => {
                BigRational::new(BigInt::from(n), BigInt::from(m)).pow(n_s as i32)
            }
            Self::Binomial { p } => {
                let q = BigRational::one() - Self::exact_p(p);
                pow_exact(&q, m as i64 - n as i64)
            }
        })
    }
}

pub(crate) fn factorial_exact(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * i)
}

pub(crate) fn binomial_exact(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    (0..k).fold(BigInt::one(), |acc, i| acc * (n - i) / (i + 1))
}

pub(crate) fn pow_exact(base: &BigRational, exp: i64) -> BigRational {
    base.pow(exp as i32)
}
