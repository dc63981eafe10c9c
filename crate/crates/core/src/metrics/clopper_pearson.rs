//! Exact binomial (Clopper-Pearson) intervals.
//!
//! Each endpoint is found by bisection on the binomial tail probability, so
//! no incomplete-beta function is needed. Tails are summed outward from the
//! boundary index and stop once terms no longer change the sum, which keeps
//! evaluation cost proportional to the spread of the distribution rather
//! than to `n`.

use super::MetricsError;

/// Absolute width at which bisection stops.
pub const BISECTION_TOLERANCE: f64 = 1e-9;
pub const MAX_BISECTION_ITERATIONS: usize = 200;

/// Two-sided exact interval for `correct` successes out of `total` trials.
///
/// `ci_low` is 0 when `correct == 0` and `ci_high` is 1 when
/// `correct == total`; otherwise each endpoint solves the tail equality at
/// `(1 - level) / 2`.
pub fn clopper_pearson(correct: u64, total: u64, level: f64) -> Result<(f64, f64), MetricsError> {
    if total == 0 || correct > total {
        return Err(MetricsError::InvalidCounts { correct, total });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(MetricsError::InvalidLevel(level));
    }
    let half_alpha = (1.0 - level) / 2.0;
    let low = if correct == 0 {
        0.0
    } else {
        // P(X >= k; p) rises with p.
        bisect(|p| upper_tail(correct, total, p) < half_alpha)
    };
    let high = if correct == total {
        1.0
    } else {
        // P(X <= k; p) falls with p.
        bisect(|p| lower_tail(correct, total, p) > half_alpha)
    };
    let point = correct as f64 / total as f64;
    Ok((low.clamp(0.0, point), high.clamp(point, 1.0)))
}

/// Finds the boundary of a predicate that holds on `[0, x)` and fails on
/// `(x, 1]`.
fn bisect(below_root: impl Fn(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..MAX_BISECTION_ITERATIONS {
        if hi - lo <= BISECTION_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if below_root(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `ln(n!)`: exact product for small `n`, Stirling series beyond.
pub(crate) fn ln_factorial(n: u64) -> f64 {
    if n < 32 {
        return (2..=n).map(|i| (i as f64).ln()).sum();
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

fn ln_pmf(i: u64, n: u64, ln_p: f64, ln_q: f64) -> f64 {
    ln_factorial(n) - ln_factorial(i) - ln_factorial(n - i) + i as f64 * ln_p + (n - i) as f64 * ln_q
}

/// Sums pmf terms starting at `start` and walking in `dir` (+1 or -1)
/// until the terms stop contributing. Only valid when the walk moves away
/// from the mode, i.e. terms are non-increasing.
fn sum_away_from_mode(start: u64, n: u64, p: f64, dir: i64) -> f64 {
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let ratio = p / (1.0 - p);
    let mut term = ln_pmf(start, n, ln_p, ln_q).exp();
    let mut sum = 0.0;
    let mut i = start;
    loop {
        sum += term;
        if term == 0.0 || term <= sum * 1e-17 {
            break;
        }
        if dir > 0 {
            if i == n {
                break;
            }
            term *= (n - i) as f64 / (i + 1) as f64 * ratio;
            i += 1;
        } else {
            if i == 0 {
                break;
            }
            term *= i as f64 / (n - i + 1) as f64 / ratio;
            i -= 1;
        }
    }
    sum
}

fn mode(n: u64, p: f64) -> u64 {
    (((n + 1) as f64 * p).floor() as u64).min(n)
}

/// `P(X >= k)` for `X ~ Binomial(n, p)`.
pub fn upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    if k > mode(n, p) {
        sum_away_from_mode(k, n, p, 1).min(1.0)
    } else {
        (1.0 - sum_away_from_mode(k - 1, n, p, -1)).max(0.0)
    }
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`.
pub fn lower_tail(k: u64, n: u64, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    1.0 - upper_tail(k + 1, n, p)
}
