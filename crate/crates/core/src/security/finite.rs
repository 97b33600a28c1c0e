//! Multiplicative Chernoff bounds for Poisson-binomial counts.
//!
//! Each bound fails with probability at most `xi`. The deviation `delta`
//! is found by bisection on the log of the Chernoff tail; the exponent of
//! the tail is the (unknown) expectation, written in terms of the
//! observation and `delta`.

use crate::error::{invalid, Result};

const REL_TOL: f64 = 1e-12;
const MAX_ITER: usize = 400;

/// Finds the root of a decreasing function on `[lo, hi]`.
fn bisect_decreasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= REL_TOL * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn check(xi: f64) -> Result<()> {
    if xi > 0.0 && xi < 1.0 {
        Ok(())
    } else {
        Err(invalid("xi", format!("must lie in (0, 1), got {xi}")))
    }
}

/// Lower and upper bounds on the expectation of a count given one
/// observation of it.
pub fn fluctuation_bounds(observed: f64, xi: f64) -> Result<(f64, f64)> {
    check(xi)?;
    if !(observed >= 0.0) || !observed.is_finite() {
        return Err(invalid("observed", format!("must be finite and >= 0, got {observed}")));
    }
    Ok((expectation_lower(observed, xi), expectation_upper(observed, xi)))
}

/// `E >= x / (1 + d)` where `(e^d / (1+d)^(1+d))^E = xi`, `E = x / (1 + d)`.
pub(crate) fn expectation_lower(x: f64, xi: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_xi = xi.ln();
    let g = |d: f64| x * (d / (1.0 + d) - d.ln_1p());
    let mut hi = 1.0;
    while g(hi) > ln_xi {
        hi *= 2.0;
        if hi > 1e300 {
            return 0.0;
        }
    }
    x / (1.0 + bisect_decreasing(g, ln_xi, 0.0, hi))
}

/// `E <= x / (1 - d)` where `(e^-d / (1-d)^(1-d))^E = xi`, `E = x / (1 - d)`.
pub(crate) fn expectation_upper(x: f64, xi: f64) -> f64 {
    if x <= 0.0 {
        // P(X = 0) = e^-E <= xi.
        return -xi.ln();
    }
    let ln_xi = xi.ln();
    let g = |d: f64| x * (-d / (1.0 - d) - (-d).ln_1p());
    let d = bisect_decreasing(g, ln_xi, 0.0, 1.0 - 1e-15);
    x / (1.0 - d)
}

/// Smallest count an observation with expectation `e` takes, except with
/// probability `xi`: `(1 - d) e` with `(e^-d / (1-d)^(1-d))^e = xi`.
pub fn observed_lower(e: f64, xi: f64) -> f64 {
    if e <= 0.0 {
        return 0.0;
    }
    let ln_xi = xi.ln();
    // At d = 1 the tail is e^-E; if even that exceeds xi the bound is 0.
    if -e >= ln_xi {
        return 0.0;
    }
    let g = |d: f64| e * (-d - (1.0 - d) * (-d).ln_1p());
    let d = bisect_decreasing(g, ln_xi, 0.0, 1.0);
    (1.0 - d) * e
}
