//! Log-space combinatorics and one-sided Clopper–Pearson bounds.
//!
//! Every quantity here is evaluated without materialising a binomial
//! coefficient: the sizes involved (tens of thousands of samples, selections
//! of up to a thousand) overflow any fixed-width integer and lose all
//! precision in `f64` if formed directly.

use crate::error::{Error, Result};

/// Absolute tolerance in `p` for the Clopper–Pearson bisection.
pub const CP_TOLERANCE: f64 = 1e-12;

/// `ln C(n, k)`; negative infinity when `k > n`.
pub fn log_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// `ln (C(a, k) / C(b, k))` as a sum of per-factor log ratios.
///
/// Negative infinity when `a < k`.
pub fn log_binomial_ratio(a: u64, b: u64, k: u64) -> Result<f64> {
    if b < k {
        return Err(Error::InvalidArgument(format!(
            "binomial ratio denominator C({b}, {k}) is zero"
        )));
    }
    if a < k {
        return Ok(f64::NEG_INFINITY);
    }
    let diff = a as f64 - b as f64;
    Ok((0..k).map(|i| (diff / (b - i) as f64).ln_1p()).sum())
}

/// `C(a, k) / C(b, k)` computed as `prod_{i<k} (a - i) / (b - i)`.
pub fn binomial_ratio(a: u64, b: u64, k: u64) -> Result<f64> {
    log_binomial_ratio(a, b, k).map(f64::exp)
}

/// `ln(e^a + e^b)` without overflow.
fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log of `sum_{j=lo}^{hi} C(trials, j) p^j (1-p)^(trials-j)` for `0 < p < 1`.
fn log_pmf_range(trials: u64, lo: u64, hi: u64, p: f64) -> f64 {
    if lo > hi {
        return f64::NEG_INFINITY;
    }
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let odds = ln_p - ln_q;
    let mut term = log_binomial(trials, lo) + lo as f64 * ln_p + (trials - lo) as f64 * ln_q;
    let mut acc = term;
    for j in lo..hi {
        term += ((trials - j) as f64 / (j + 1) as f64).ln() + odds;
        acc = log_add_exp(acc, term);
    }
    acc
}

/// `P(X >= count)` for `X ~ Binomial(trials, p)`.
///
/// Sums whichever side of the distribution has fewer terms.
pub fn binomial_upper_tail(count: u64, trials: u64, p: f64) -> f64 {
    if count == 0 {
        return 1.0;
    }
    if count > trials {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    if trials - count < count {
        log_pmf_range(trials, count, trials, p).exp().min(1.0)
    } else {
        (1.0 - log_pmf_range(trials, 0, count - 1, p).exp()).clamp(0.0, 1.0)
    }
}

/// `P(X <= count)` for `X ~ Binomial(trials, p)`.
pub fn binomial_lower_tail(count: u64, trials: u64, p: f64) -> f64 {
    if count >= trials {
        return 1.0;
    }
    1.0 - binomial_upper_tail(count + 1, trials, p)
}

fn check_cp_args(count: u64, trials: u64, alpha_half: f64) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    if count > trials {
        return Err(Error::InvalidArgument(format!(
            "count {count} exceeds trials {trials}"
        )));
    }
    if !(alpha_half > 0.0 && alpha_half < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence parameter {alpha_half} not in (0, 1)"
        )));
    }
    Ok(())
}

/// Bisect an increasing predicate on `[0, 1]`; returns `(lo, hi)` with
/// `!holds(lo)`, `holds(hi)` and `hi - lo <= CP_TOLERANCE`.
fn bisect(mut holds: impl FnMut(f64) -> bool) -> (f64, f64) {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > CP_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// One-sided Clopper–Pearson lower bound: the smallest `p` under which
/// observing at least `count` successes has probability `alpha_half`.
pub fn cp_lower(count: u64, trials: u64, alpha_half: f64) -> Result<f64> {
    check_cp_args(count, trials, alpha_half)?;
    if count == 0 {
        return Ok(0.0);
    }
    let (lo, _) = bisect(|p| binomial_upper_tail(count, trials, p) >= alpha_half);
    Ok(lo)
}

/// One-sided Clopper–Pearson upper bound: the largest `p` under which
/// observing at most `count` successes has probability `alpha_half`.
pub fn cp_upper(count: u64, trials: u64, alpha_half: f64) -> Result<f64> {
    check_cp_args(count, trials, alpha_half)?;
    if count == trials {
        return Ok(1.0);
    }
    // P(X <= count) is decreasing in p.
    let (_, hi) = bisect(|p| binomial_lower_tail(count, trials, p) < alpha_half);
    Ok(hi)
}

/// Both one-sided bounds for a single observed count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialBound {
    pub count: u64,
    pub trials: u64,
    pub alpha_half: f64,
    pub lower: f64,
    pub upper: f64,
}

impl BinomialBound {
    pub fn new(count: u64, trials: u64, alpha_half: f64) -> Result<Self> {
        Ok(Self {
            count,
            trials,
            alpha_half,
            lower: cp_lower(count, trials, alpha_half)?,
            upper: cp_upper(count, trials, alpha_half)?,
        })
    }

    pub fn rate(&self) -> f64 {
        self.count as f64 / self.trials as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pascal(rows: usize) -> Vec<Vec<f64>> {
        let mut t = vec![vec![1.0]];
        for n in 1..=rows {
            let prev = &t[n - 1];
            let mut row = vec![1.0; n + 1];
            for k in 1..n {
                row[k] = prev[k - 1] + prev[k];
            }
            t.push(row);
        }
        t
    }

    #[test]
    fn log_binomial_matches_pascal_triangle() {
        let t = pascal(40);
        for n in 0..=40u64 {
            for k in 0..=n {
                let want = t[n as usize][k as usize].ln();
                let got = log_binomial(n, k);
                assert!((got - want).abs() < 1e-12, "C({n},{k})");
            }
        }
        assert!((log_binomial(4, 2) - 6f64.ln()).abs() < 1e-15);
        assert_eq!(log_binomial(10, 0), 0.0);
        assert_eq!(log_binomial(2, 5), f64::NEG_INFINITY);
    }

    #[test]
    fn binomial_ratio_examples() {
        // 2-subsets: 3 of a 3-set, 6 of a 4-set.
        assert!((binomial_ratio(3, 4, 2).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(binomial_ratio(17, 17, 5).unwrap(), 1.0);
        assert_eq!(binomial_ratio(1, 4, 2).unwrap(), 0.0);
        assert!(binomial_ratio(5, 1, 2).is_err());
    }

    #[test]
    fn binomial_ratio_handles_large_sets() {
        let r = binomial_ratio(50_000 - 500, 50_000, 1000).unwrap();
        assert!(r > 0.0 && r < 1.0 && r.is_finite());
    }

    #[test]
    fn cp_lower_all_successes_closed_form() {
        let v = cp_lower(1000, 1000, 0.0005).unwrap();
        assert!((v - 0.0005f64.powf(1.0 / 1000.0)).abs() < 1e-9);
        assert!((v - 0.992428).abs() < 1e-5);
    }

    #[test]
    fn cp_upper_no_successes_closed_form() {
        let v = cp_upper(0, 1000, 0.0005).unwrap();
        assert!((v - (1.0 - 0.0005f64.powf(1.0 / 1000.0))).abs() < 1e-9);
        assert!((v - 0.007572).abs() < 1e-5);
    }

    #[test]
    fn vacuous_ends() {
        assert_eq!(cp_lower(0, 37, 0.3).unwrap(), 0.0);
        assert_eq!(cp_upper(37, 37, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn defining_equations_hold() {
        let v = cp_lower(500, 1000, 0.0005).unwrap();
        assert!(v < 0.5);
        assert!((binomial_upper_tail(500, 1000, v) - 0.0005).abs() < 1e-10);

        let u = cp_upper(1, 10, 0.025).unwrap();
        // direct tail: (1-u)^10 + 10 u (1-u)^9
        let direct = (1.0 - u).powi(10) + 10.0 * u * (1.0 - u).powi(9);
        assert!((direct - 0.025).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(cp_lower(3, 2, 0.1).is_err());
        assert!(cp_lower(1, 0, 0.1).is_err());
        assert!(cp_upper(1, 2, 0.0).is_err());
        assert!(cp_upper(1, 2, 1.0).is_err());
    }

    #[test]
    fn tails_agree_with_direct_sum() {
        let (t, p) = (12u64, 0.37f64);
        let pmf =
            |j: u64| pascal(12)[12][j as usize] * p.powi(j as i32) * (1.0 - p).powi((t - j) as i32);
        for k in 0..=t {
            let up: f64 = (k..=t).map(pmf).sum();
            let down: f64 = (0..=k).map(pmf).sum();
            assert!((binomial_upper_tail(k, t, p) - up).abs() < 1e-13);
            assert!((binomial_lower_tail(k, t, p) - down).abs() < 1e-13);
        }
    }
}
