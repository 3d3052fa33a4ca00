//! Damped Picard iteration.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Damping used once successive residuals flip sign.
const OSCILLATION_DAMPING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    /// Initial relaxation weight in `(0, 1]`.
    pub damping: T,
}

impl<T: Real> Default for FixedPointOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-12),
            max_iter: 10_000,
            damping: T::one(),
        }
    }
}

/// Converged iterate together with the diagnostics of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint<T> {
    pub x: Vec<T>,
    /// Number of map evaluations performed.
    pub iterations: usize,
    /// `‖map(x) − x‖∞` for the returned `x`.
    pub residual: T,
    /// Damping in force when the iteration stopped.
    pub damping: T,
}

/// Iterates `x ← x + w·(map(x) − x)` until `‖map(x) − x‖∞ ≤ tol`.
///
/// The returned `x` is the iterate whose residual was checked, so the
/// tolerance holds for it exactly. Damping drops to 0.5 when any residual
/// component changes sign between iterations.
pub fn fixed_point<T, F>(mut map: F, x0: &[T], opts: &FixedPointOptions<T>) -> Result<FixedPoint<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    if !(opts.tol > T::zero()) || opts.max_iter == 0 {
        return Err(Error::InvalidInput(
            "fixed_point needs tol > 0 and max_iter >= 1".into(),
        ));
    }
    if !(opts.damping > T::zero() && opts.damping <= T::one()) {
        return Err(Error::InvalidInput("damping must lie in (0, 1]".into()));
    }
    let fallback = T::lit(OSCILLATION_DAMPING);
    let mut damping = opts.damping;
    let mut x = x0.to_vec();
    let mut prev: Option<Vec<T>> = None;
    let mut residual = T::infinity();

    for iteration in 1..=opts.max_iter {
        let fx = map(&x)?;
        if fx.len() != x.len() {
            return Err(Error::InvalidInput("map changed the vector length".into()));
        }
        let r: Vec<T> = fx.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        residual = r.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if !residual.is_finite() {
            return Err(Error::NoConvergence {
                iterations: iteration,
                residual: f64::INFINITY,
            });
        }
        if residual <= opts.tol {
            return Ok(FixedPoint {
                x,
                iterations: iteration,
                residual,
                damping,
            });
        }
        if let Some(p) = &prev {
            let flipped = p.iter().zip(&r).any(|(&a, &b)| a * b < T::zero());
            if flipped && damping > fallback {
                damping = fallback;
            }
        }
        for (xi, ri) in x.iter_mut().zip(&r) {
            *xi = *xi + damping * *ri;
        }
        prev = Some(r);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: residual.as_f64(),
    })
}
