//! Dormand–Prince 5(4) explicit Runge–Kutta integrator with adaptive steps.

use crate::error::{Error, Result};
use crate::numerics::Trajectory;
use crate::scalar::Real;

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem<T: Real> {
    fn dim(&self) -> usize;

    /// Writes `f(t, y)` into `dy`.
    fn rate(&self, t: T, y: &[T], dy: &mut [T]) -> Result<()>;

    /// Hook run on every accepted state before it is stored. May project
    /// the state (e.g. clamp round-off negatives) or abort integration.
    fn accept(&self, _t: T, _y: &mut [T]) -> Result<()> {
        Ok(())
    }
}

/// Step-control settings for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub initial_step: Option<T>,
    pub max_step: Option<T>,
    pub max_steps: usize,
    /// Minimum spacing between stored points; `0` stores every accepted step.
    pub store_interval: T,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-8),
            abs_tol: T::lit(1e-10),
            initial_step: None,
            max_step: None,
            max_steps: 5_000_000,
            store_interval: T::zero(),
        }
    }
}

impl<T: Real> OdeOptions<T> {
    pub fn tolerances(rel_tol: T, abs_tol: T) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn store_interval(mut self, interval: T) -> Self {
        self.store_interval = interval;
        self
    }

    pub fn max_step(mut self, h: T) -> Self {
        self.max_step = Some(h);
        self
    }
}

struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<T: Real, F: Fn(T, &[T], &mut [T])> OdeSystem<T> for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rate(&self, t: T, y: &[T], dy: &mut [T]) -> Result<()> {
        (self.f)(t, y, dy);
        Ok(())
    }
}

/// Integrates a closure right-hand side with default step control.
pub fn integrate_ode<T, F>(rhs: F, y0: &[T], t_span: (T, T), rel_tol: T, abs_tol: T) -> Result<Trajectory<T>>
where
    T: Real,
    F: Fn(T, &[T], &mut [T]),
{
    let sys = FnSystem { dim: y0.len(), f: rhs };
    integrate(&sys, y0, t_span, &OdeOptions::tolerances(rel_tol, abs_tol))
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Tableau<T> {
    c: [T; 4],
    a: [[T; 6]; 6],
    e: [T; 7],
}

impl<T: Real> Tableau<T> {
    fn new() -> Self {
        let l = T::lit;
        let z = T::zero();
        Self {
            c: [l(C2), l(C3), l(C4), l(C5)],
            a: [
                [l(A21), z, z, z, z, z],
                [l(A31), l(A32), z, z, z, z],
                [l(A41), l(A42), l(A43), z, z, z],
                [l(A51), l(A52), l(A53), l(A54), z, z],
                [l(A61), l(A62), l(A63), l(A64), l(A65), z],
                [l(A71), z, l(A73), l(A74), l(A75), l(A76)],
            ],
            e: [l(E1), z, l(E3), l(E4), l(E5), l(E6), l(E7)],
        }
    }
}

fn eval<T: Real, S: OdeSystem<T>>(sys: &S, t: T, y: &[T], dy: &mut [T]) -> Result<()> {
    sys.rate(t, y, dy)?;
    if dy.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteRate { t: t.as_f64() });
    }
    Ok(())
}

fn weighted_rms<T: Real>(v: &[T], scale_a: &[T], scale_b: &[T], opts: &OdeOptions<T>) -> T {
    if v.is_empty() {
        return T::zero();
    }
    let sum = v
        .iter()
        .zip(scale_a.iter().zip(scale_b))
        .fold(T::zero(), |acc, (&x, (&a, &b))| {
            let sc = opts.abs_tol + opts.rel_tol * a.abs().max(b.abs());
            let r = x / sc;
            acc + r * r
        });
    (sum / T::from_usize(v.len()).unwrap_or_else(T::one)).sqrt()
}

/// Hairer–Wanner starting step heuristic.
fn initial_step<T: Real, S: OdeSystem<T>>(
    sys: &S,
    t0: T,
    y0: &[T],
    f0: &[T],
    span: T,
    opts: &OdeOptions<T>,
) -> Result<T> {
    let d0 = weighted_rms(y0, y0, y0, opts);
    let d1 = weighted_rms(f0, y0, y0, opts);
    let tiny = T::lit(1e-5);
    let mut h0 = if d0 < tiny || d1 < tiny {
        T::lit(1e-6)
    } else {
        T::lit(0.01) * d0 / d1
    };
    h0 = h0.min(span);
    let y1: Vec<T> = y0.iter().zip(f0).map(|(&y, &f)| y + h0 * f).collect();
    let mut f1 = vec![T::zero(); y0.len()];
    eval(sys, t0 + h0, &y1, &mut f1)?;
    let diff: Vec<T> = f1.iter().zip(f0).map(|(&a, &b)| a - b).collect();
    let d2 = weighted_rms(&diff, y0, y0, opts) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / dmax).powf(T::lit(0.2))
    };
    Ok((T::lit(100.0) * h0).min(h1).min(span))
}

/// Integrates `sys` from `t_span.0` to `t_span.1`.
///
/// Errors on step-size underflow, a non-finite rate, exhausting
/// `max_steps`, or whatever the system's [`OdeSystem::accept`] hook raises.
pub fn integrate<T: Real, S: OdeSystem<T>>(
    sys: &S,
    y0: &[T],
    t_span: (T, T),
    opts: &OdeOptions<T>,
) -> Result<Trajectory<T>> {
    let (t0, t_end) = t_span;
    if !(t0 < t_end) {
        return Err(Error::InvalidInput("t_span must be increasing".into()));
    }
    if !(opts.rel_tol > T::zero()) || !(opts.abs_tol > T::zero()) {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::InvalidInput(format!(
            "initial state has {} components, system expects {n}",
            y0.len()
        )));
    }
    let tab = Tableau::<T>::new();
    let span = t_end - t0;
    let max_step = opts.max_step.unwrap_or(span).min(span);

    let mut t = t0;
    let mut y = y0.to_vec();
    sys.accept(t, &mut y)?;
    let mut k = vec![vec![T::zero(); n]; 7];
    eval(sys, t, &y, &mut k[0])?;

    let mut times = vec![t];
    let mut states = y.clone();
    let mut rates = k[0].clone();
    let mut last_stored = t;

    let mut h = match opts.initial_step {
        Some(h) => h,
        None => initial_step(sys, t, &y, &k[0], span, opts)?,
    }
    .min(max_step);

    let mut stage = vec![T::zero(); n];
    let mut y_new = vec![T::zero(); n];
    let mut err = vec![T::zero(); n];
    let mut steps = 0usize;
    let mut rejected_last = false;

    loop {
        if steps >= opts.max_steps {
            return Err(Error::TooManySteps {
                t: t.as_f64(),
                max_steps: opts.max_steps,
            });
        }
        let remaining = t_end - t;
        let last_step = h >= remaining * (T::one() - T::lit(1e-12));
        if last_step {
            h = remaining;
        }
        let h_floor = T::lit(16.0) * T::epsilon() * t.abs().max(span);
        if h < h_floor {
            return Err(Error::StepUnderflow {
                t: t.as_f64(),
                h: h.as_f64(),
            });
        }

        for s in 1..7 {
            for i in 0..n {
                let mut acc = T::zero();
                for (j, kj) in k.iter().take(s).enumerate() {
                    acc = acc + tab.a[s - 1][j] * kj[i];
                }
                stage[i] = y[i] + h * acc;
            }
            let ts = if s < 5 { t + tab.c[s - 1] * h } else { t + h };
            eval(sys, ts, &stage, &mut k[s])?;
            if s == 6 {
                y_new.copy_from_slice(&stage);
            }
        }
        for i in 0..n {
            let mut acc = T::zero();
            for (j, kj) in k.iter().enumerate() {
                acc = acc + tab.e[j] * kj[i];
            }
            err[i] = h * acc;
        }
        let err_norm = weighted_rms(&err, &y, &y_new, opts);
        steps += 1;

        if err_norm <= T::one() {
            let t_new = if last_step { t_end } else { t + h };
            let before = y_new.clone();
            sys.accept(t_new, &mut y_new)?;
            if y_new != before {
                eval(sys, t_new, &y_new, &mut k[6])?;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);

            if last_step || t - last_stored >= opts.store_interval {
                times.push(t);
                states.extend_from_slice(&y);
                rates.extend_from_slice(&k[0]);
                last_stored = t;
            }
            if last_step {
                break;
            }
            let fac = if err_norm == T::zero() {
                T::lit(FAC_MAX)
            } else {
                (T::lit(SAFETY) * err_norm.powf(T::lit(-0.2)))
                    .max(T::lit(FAC_MIN))
                    .min(T::lit(FAC_MAX))
            };
            let fac = if rejected_last { fac.min(T::one()) } else { fac };
            h = (h * fac).min(max_step);
            rejected_last = false;
        } else {
            let fac = (T::lit(SAFETY) * err_norm.powf(T::lit(-0.2))).max(T::lit(FAC_MIN));
            h = h * fac.min(T::one());
            rejected_last = true;
        }
    }

    Ok(Trajectory::from_raw(n, times, states, rates))
}
