use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_BISECTIONS: usize = 400;

/// Bisection on a bracket with a sign change.
///
/// Stops once the bracket is narrower than `tol` (or `g` hits zero) and
/// returns its midpoint. `g` is fallible so the caller can bisect over a
/// simulation.
pub fn bisect<T, F>(mut g: F, lo: T, hi: T, tol: T) -> Result<T>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    if !(tol > T::zero()) || !(lo < hi) {
        return Err(Error::InvalidInput("bisect needs lo < hi and tol > 0".into()));
    }
    let (mut a, mut b) = (lo, hi);
    let ga = g(a)?;
    if ga == T::zero() {
        return Ok(a);
    }
    let gb = g(b)?;
    if gb == T::zero() {
        return Ok(b);
    }
    if ga.is_nan() || gb.is_nan() || ga.signum() == gb.signum() {
        return Err(Error::NoSignChange {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
            g_lo: ga.as_f64(),
            g_hi: gb.as_f64(),
        });
    }
    let a_negative = ga < T::zero();
    let half = T::lit(0.5);
    for _ in 0..MAX_BISECTIONS {
        if b - a <= tol {
            break;
        }
        let mid = a + (b - a) * half;
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid)?;
        if gm == T::zero() {
            return Ok(mid);
        }
        if (gm < T::zero()) == a_negative {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(a + (b - a) * half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn square_root_of_two() {
        let r = bisect(|x: f64| Ok(x * x - 2.0), 1.0, 2.0, 1e-10).unwrap();
        assert_abs_diff_eq!(r, 2f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn linear_root() {
        let r = bisect(|x: f64| Ok(x - 3.0), 0.0, 10.0, 1e-12).unwrap();
        assert_abs_diff_eq!(r, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn decreasing_function() {
        let r = bisect(|x: f64| Ok(1.0 - x), 0.0, 4.0, 1e-12).unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn no_sign_change() {
        let err = bisect(|x: f64| Ok(x * x + 1.0), -1.0, 1.0, 1e-8).unwrap_err();
        assert!(matches!(err, Error::NoSignChange { .. }));
    }

    #[test]
    fn errors_from_g_propagate() {
        let err = bisect(|_: f64| Err(Error::Calibration("boom".into())), 0.0, 1.0, 1e-8).unwrap_err();
        assert_eq!(err, Error::Calibration("boom".into()));
    }
}
