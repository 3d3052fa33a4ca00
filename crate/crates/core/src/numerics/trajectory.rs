use crate::error::{Error, Result};
use crate::scalar::Real;

/// Time-indexed solution of an ODE system.
///
/// States are stored row-major (`dim` values per stored time). When the
/// trajectory comes from the integrator the exact rates at each stored
/// point are kept too; quadrature then uses the cubic Hermite rule, which
/// is far more accurate than trapezoids on the same nodes. Point lookups
/// always interpolate linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    dim: usize,
    times: Vec<T>,
    states: Vec<T>,
    rates: Option<Vec<T>>,
}

impl<T: Real> Trajectory<T> {
    /// Builds a trajectory from samples without rate information.
    pub fn new(times: Vec<T>, states: Vec<Vec<T>>) -> Result<Self> {
        let dim = states.first().map_or(0, Vec::len);
        let flat = flatten(&states, dim)?;
        let traj = Self {
            dim,
            times,
            states: flat,
            rates: None,
        };
        traj.validate()?;
        Ok(traj)
    }

    /// Builds a trajectory from samples and their time derivatives.
    pub fn with_rates(times: Vec<T>, states: Vec<Vec<T>>, rates: Vec<Vec<T>>) -> Result<Self> {
        let dim = states.first().map_or(0, Vec::len);
        let flat = flatten(&states, dim)?;
        let flat_rates = flatten(&rates, dim)?;
        if flat_rates.len() != flat.len() {
            return Err(Error::InvalidInput("rates and states differ in length".into()));
        }
        let traj = Self {
            dim,
            times,
            states: flat,
            rates: Some(flat_rates),
        };
        traj.validate()?;
        Ok(traj)
    }

    pub(crate) fn from_raw(dim: usize, times: Vec<T>, states: Vec<T>, rates: Vec<T>) -> Self {
        debug_assert_eq!(states.len(), times.len() * dim);
        debug_assert_eq!(rates.len(), states.len());
        Self {
            dim,
            times,
            states,
            rates: Some(rates),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.times.is_empty() {
            return Err(Error::InvalidInput("trajectory needs at least one point".into()));
        }
        if self.states.len() != self.times.len() * self.dim {
            return Err(Error::InvalidInput("states list must align with times".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("times must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn start(&self) -> T {
        self.times[0]
    }

    pub fn end(&self) -> T {
        self.times[self.times.len() - 1]
    }

    pub fn has_rates(&self) -> bool {
        self.rates.is_some()
    }

    /// Stored state at index `k`.
    pub fn state(&self, k: usize) -> &[T] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    /// Stored rate at index `k`, if rates were recorded.
    pub fn rate(&self, k: usize) -> Option<&[T]> {
        self.rates.as_ref().map(|r| &r[k * self.dim..(k + 1) * self.dim])
    }

    pub fn last(&self) -> &[T] {
        self.state(self.len() - 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, &[T])> + '_ {
        self.times
            .iter()
            .copied()
            .zip(self.states.chunks_exact(self.dim.max(1)))
    }

    fn check_span(&self, t: T) -> Result<()> {
        let slack = T::lit(1e-12) * (T::one() + self.end().abs());
        if t < self.start() - slack || t > self.end() + slack || t.is_nan() {
            return Err(Error::OutOfRange {
                t: t.as_f64(),
                start: self.start().as_f64(),
                end: self.end().as_f64(),
            });
        }
        Ok(())
    }

    /// Index `k` of the interval `[times[k], times[k+1]]` holding `t`.
    fn interval(&self, t: T) -> usize {
        let n = self.times.len();
        if n < 2 {
            return 0;
        }
        match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).expect("finite times"))
        {
            Ok(k) => k.min(n - 2),
            Err(k) => k.saturating_sub(1).min(n - 2),
        }
    }

    /// Piecewise-linear interpolated state at `t`.
    pub fn at(&self, t: T) -> Result<Vec<T>> {
        self.check_span(t)?;
        if self.len() == 1 {
            return Ok(self.state(0).to_vec());
        }
        let k = self.interval(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = ((t - t0) / (t1 - t0)).max(T::zero()).min(T::one());
        Ok(self
            .state(k)
            .iter()
            .zip(self.state(k + 1))
            .map(|(&a, &b)| a + (b - a) * w)
            .collect())
    }

    /// `∫ Σ_j weights[j]·y_j dt` from the start of the trajectory to `upto`.
    pub fn integral(&self, weights: &[T], upto: T) -> Result<T> {
        if weights.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "expected {} weights, got {}",
                self.dim,
                weights.len()
            )));
        }
        self.check_span(upto)?;
        let upto = upto.min(self.end()).max(self.start());
        let dot = |v: &[T]| v.iter().zip(weights).fold(T::zero(), |acc, (&a, &w)| acc + a * w);
        let mut total = T::zero();
        for k in 0..self.len().saturating_sub(1) {
            let (t0, t1) = (self.times[k], self.times[k + 1]);
            if t0 >= upto {
                break;
            }
            let h = t1 - t0;
            let tau = ((upto.min(t1) - t0) / h).min(T::one());
            let y0 = dot(self.state(k));
            let y1 = dot(self.state(k + 1));
            total = total
                + match (self.rate(k), self.rate(k + 1)) {
                    (Some(r0), Some(r1)) => hermite_partial(h, tau, y0, y1, dot(r0), dot(r1)),
                    _ => linear_partial(h, tau, y0, y1),
                };
        }
        Ok(total)
    }

    /// Restricts every stored point to the components in `range`.
    pub fn project(&self, range: std::ops::Range<usize>) -> Trajectory<T> {
        let width = range.len();
        let pick = |flat: &[T]| -> Vec<T> {
            flat.chunks_exact(self.dim)
                .flat_map(|row| row[range.clone()].iter().copied())
                .collect()
        };
        Trajectory {
            dim: width,
            times: self.times.clone(),
            states: pick(&self.states),
            rates: self.rates.as_deref().map(pick),
        }
    }
}

fn flatten<T: Copy>(rows: &[Vec<T>], dim: usize) -> Result<Vec<T>> {
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidInput("state vectors differ in dimension".into()));
    }
    Ok(rows.iter().flatten().copied().collect())
}

fn linear_partial<T: Real>(h: T, tau: T, y0: T, y1: T) -> T {
    let half = T::lit(0.5);
    h * (y0 * tau + (y1 - y0) * half * tau * tau)
}

/// Integral over `[t0, t0 + tau·h]` of the cubic Hermite interpolant.
fn hermite_partial<T: Real>(h: T, tau: T, y0: T, y1: T, f0: T, f1: T) -> T {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let t4 = t3 * tau;
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let third = T::one() / T::lit(3.0);
    let h00 = t4 * half - t3 + tau;
    let h10 = t4 * quarter - T::lit(2.0) * third * t3 + t2 * half;
    let h01 = -t4 * half + t3;
    let h11 = t4 * quarter - t3 * third;
    h * (y0 * h00 + h * f0 * h10 + y1 * h01 + h * f1 * h11)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_non_increasing_times() {
        let err = Trajectory::new(vec![0.0, 1.0, 1.0], vec![vec![0.0]; 3]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn rejects_misaligned_states() {
        assert!(Trajectory::new(vec![0.0, 1.0], vec![vec![0.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn linear_lookup_and_range() {
        let traj = Trajectory::new(vec![0.0, 2.0], vec![vec![0.0, 4.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(traj.at(1.0).unwrap(), vec![1.0, 2.0]);
        assert!(matches!(traj.at(2.5), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn hermite_quadrature_is_exact_for_cubics() {
        // y = t^3, y' = 3t^2, sampled coarsely.
        let times: Vec<f64> = vec![0.0, 0.7, 1.5, 3.0];
        let states = times.iter().map(|t| vec![t * t * t]).collect();
        let rates = times.iter().map(|t| vec![3.0 * t * t]).collect();
        let traj = Trajectory::with_rates(times, states, rates).unwrap();
        assert_relative_eq!(traj.integral(&[1.0], 3.0).unwrap(), 81.0 / 4.0, epsilon = 1e-12);
        assert_relative_eq!(
            traj.integral(&[1.0], 2.2).unwrap(),
            2.2f64.powi(4) / 4.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn trapezoid_without_rates() {
        let traj = Trajectory::new(vec![0.0, 1.0, 2.0], vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert_relative_eq!(traj.integral(&[2.0], 1.5).unwrap(), 2.25, epsilon = 1e-14);
    }

    #[test]
    fn projection_keeps_rates() {
        let traj = Trajectory::with_rates(
            vec![0.0, 1.0],
            vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
            vec![vec![0.5, 0.5, 0.5], vec![0.5, 0.5, 0.5]],
        )
        .unwrap();
        let p = traj.project(1..3);
        assert_eq!(p.dim(), 2);
        assert_eq!(p.state(1), &[5.0, 6.0]);
        assert!(p.has_rates());
    }
}
