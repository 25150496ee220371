//! One-dimensional root finding and minimisation.

use crate::error::{Error, Result};
use crate::num::Real;

const MAX_BISECTIONS: usize = 200;
const MAX_EXPANSIONS: usize = 64;

/// Root of a strictly decreasing function.
///
/// The bracket starts at `[-1, 1]` and is doubled until `f(lo) > 0 > f(hi)`,
/// then bisected to an absolute width of `1e-13` (or until the midpoint is
/// no longer representable between the endpoints).
pub fn decreasing_root<T: Real, F: Fn(T) -> T>(f: F) -> Result<T> {
    let (mut lo, mut hi) = (-T::one(), T::one());
    let two = T::lit(2.0);
    let mut expansions = 0;
    while f(lo) <= T::zero() || f(hi) >= T::zero() {
        if f(lo) == T::zero() {
            return Ok(lo);
        }
        if f(hi) == T::zero() {
            return Ok(hi);
        }
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::ConvergenceFailure("no sign change found".into()));
        }
        if f(lo) <= T::zero() {
            lo = lo * two;
        }
        if f(hi) >= T::zero() {
            hi = hi * two;
        }
    }
    let tol = T::tol(1e-13);
    for _ in 0..MAX_BISECTIONS {
        let mid = lo + (hi - lo) / two;
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == T::zero() {
            return Ok(mid);
        }
        if fm > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + (hi - lo) / two)
}

/// Golden-section search for a minimum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmin, min)`.
pub fn golden_min<T: Real, F: Fn(T) -> T>(f: F, mut lo: T, mut hi: T, tol: T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..300 {
        if (hi - lo).abs() <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_of_line() {
        let r = decreasing_root(|x: f64| 3.0 - x).unwrap();
        assert!((r - 3.0).abs() < 1e-12);
    }

    #[test]
    fn root_far_out() {
        let r = decreasing_root(|x: f64| -1000.0 - x).unwrap();
        assert!((r + 1000.0).abs() < 1e-11);
    }

    #[test]
    fn no_root_reported() {
        assert!(decreasing_root(|_x: f64| 1.0).is_err());
    }

    #[test]
    fn golden_parabola() {
        let (x, fx) = golden_min(|x: f64| (x - 0.3).powi(2) + 1.0, -5.0, 5.0, 1e-10);
        // a flat minimum is only resolved to about sqrt(eps)
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-15);
    }
}
