//! Six-compartment zombie outbreak model (susceptible, isolated, exposed,
//! quarantined, zombified, removed).
//!
//! Compartments are measured in model units of [`EpidemicParams::persons_per_unit`]
//! persons (one thousand by default) and the bilinear rates are per
//! unit-person-day. Deaths are reported in millions of persons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bisect, integrate, OdeOptions, OdeSystem, Trajectory};
use crate::scalar::Real;

pub const COMPARTMENTS: [&str; 6] = ["S", "I", "E", "Q", "Z", "R"];

/// Decomposition rate giving a 90% chance of decay within 28 days.
pub fn decomposition_rate<T: Real>() -> T {
    T::LN_10() / T::lit(28.0)
}

/// Isolation exit rate for a two-week median stay in hiding.
pub fn kappa_fortnight<T: Real>() -> T {
    T::LN_2() / T::lit(14.0)
}

/// Isolation exit rate for a one-day half-life.
pub fn kappa_one_day<T: Real>() -> T {
    T::LN_2()
}

/// Printed calibration values.
pub const EPSILON: f64 = 3.60e-3;
pub const ZETA_E: f64 = 1.39;
pub const ZETA_Q: f64 = 1.79e-3;
pub const RHO_E: f64 = 0.0;
pub const RHO_Q: f64 = 0.90e-3;
pub const RHO_Z: f64 = 2.88e-3;
pub const DELTA: f64 = 82.24e-3;
pub const KAPPA_FORTNIGHT: f64 = 0.0495;
pub const KAPPA_ONE_DAY: f64 = 0.693;
pub const POPULATION_PERSONS: f64 = 330e6;
pub const PERSONS_PER_UNIT: f64 = 1e3;

/// Sizes of the six compartments at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PopulationState<T> {
    pub s: T,
    pub i: T,
    pub e: T,
    pub q: T,
    pub z: T,
    pub r: T,
}

impl<T: Real> PopulationState<T> {
    pub fn new(s: T, i: T, e: T, q: T, z: T, r: T) -> Self {
        Self { s, i, e, q, z, r }
    }

    pub fn susceptible(total: T) -> Self {
        Self {
            s: total,
            ..Self::zero()
        }
    }

    pub fn zero() -> Self {
        let z = T::zero();
        Self::new(z, z, z, z, z, z)
    }

    pub fn from_slice(v: &[T]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn to_array(&self) -> [T; 6] {
        [self.s, self.i, self.e, self.q, self.z, self.r]
    }

    pub fn total(&self) -> T {
        self.to_array().iter().fold(T::zero(), |a, &b| a + b)
    }

    /// Quarantined, zombified and removed: everyone lost to the plague.
    pub fn lost(&self) -> T {
        self.q + self.z + self.r
    }

    pub fn scaled(&self, factor: T) -> Self {
        let a = self.to_array().map(|v| v * factor);
        Self::from_slice(&a)
    }
}

/// Rate constants of the outbreak model plus population scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams<T> {
    pub epsilon: T,
    pub zeta_e: T,
    pub zeta_q: T,
    pub rho_e: T,
    pub rho_q: T,
    pub rho_z: T,
    pub delta: T,
    pub iota: T,
    pub kappa: T,
    pub omega: T,
    /// Total population in model units.
    pub population_total: T,
    pub persons_per_unit: T,
}

impl<T: Real> EpidemicParams<T> {
    /// Calibrated disease parameters with no isolation or quarantine.
    pub fn calibrated() -> Self {
        Self {
            epsilon: T::lit(EPSILON),
            zeta_e: T::lit(ZETA_E),
            zeta_q: T::lit(ZETA_Q),
            rho_e: T::lit(RHO_E),
            rho_q: T::lit(RHO_Q),
            rho_z: T::lit(RHO_Z),
            delta: T::lit(DELTA),
            iota: T::zero(),
            kappa: T::lit(KAPPA_FORTNIGHT),
            omega: T::zero(),
            population_total: T::lit(POPULATION_PERSONS / PERSONS_PER_UNIT),
            persons_per_unit: T::lit(PERSONS_PER_UNIT),
        }
    }

    /// Sets isolation and quarantine to the same policy level.
    pub fn with_policy(mut self, iota_omega: T) -> Self {
        self.iota = iota_omega;
        self.omega = iota_omega;
        self
    }

    pub fn with_kappa(mut self, kappa: T) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("epsilon", self.epsilon),
            ("zeta_e", self.zeta_e),
            ("zeta_q", self.zeta_q),
            ("rho_e", self.rho_e),
            ("rho_q", self.rho_q),
            ("rho_z", self.rho_z),
            ("delta", self.delta),
            ("iota", self.iota),
            ("kappa", self.kappa),
            ("omega", self.omega),
        ];
        for (name, v) in rates {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be a finite rate >= 0, got {v}"
                )));
            }
        }
        if self.zeta_q > self.zeta_e {
            return Err(Error::InvalidInput("zeta_q must not exceed zeta_e".into()));
        }
        if !(self.population_total > T::zero()) || !(self.persons_per_unit > T::zero()) {
            return Err(Error::InvalidInput("population scale must be positive".into()));
        }
        Ok(())
    }

    /// Model units to millions of persons.
    pub fn millions(&self, units: T) -> T {
        units * self.persons_per_unit / T::lit(1e6)
    }

    /// Millions of persons to model units.
    pub fn units_from_millions(&self, millions: T) -> T {
        millions * T::lit(1e6) / self.persons_per_unit
    }
}

impl<T: Real> Default for EpidemicParams<T> {
    fn default() -> Self {
        Self::calibrated()
    }
}

/// Time derivative of the compartments.
pub fn szr_derivative<T: Real>(x: &PopulationState<T>, p: &EpidemicParams<T>) -> PopulationState<T> {
    let sz = x.s * x.z;
    let isolation = p.iota * sz;
    let exposure = p.epsilon * sz;
    let returning = p.kappa * x.i;
    let quarantine = p.omega * x.e;
    let turned = p.zeta_e * x.e;
    let escaped = p.zeta_q * x.q;
    let e_removed = p.rho_e * x.s * x.e;
    let q_removed = (p.rho_q * x.s + p.delta) * x.q;
    let z_removed = (p.rho_z * (x.s + x.i) + p.delta) * x.z;
    PopulationState {
        s: returning - isolation - exposure,
        i: isolation - returning,
        e: exposure - quarantine - turned - e_removed,
        q: quarantine - escaped - q_removed,
        z: escaped + turned - z_removed,
        r: e_removed + q_removed + z_removed,
    }
}

/// Parameters, initial state and horizon of one outbreak run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub params: EpidemicParams<T>,
    pub initial: PopulationState<T>,
    pub horizon_days: T,
}

impl<T: Real> Scenario<T> {
    /// Everyone susceptible except `zombies` (model units) already turned.
    pub fn seeded(params: EpidemicParams<T>, zombies: T, horizon_days: T) -> Self {
        let mut initial = PopulationState::susceptible(params.population_total - zombies);
        initial.z = zombies;
        Self {
            params,
            initial,
            horizon_days,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.horizon_days > T::zero()) {
            return Err(Error::InvalidInput("horizon_days must be positive".into()));
        }
        let arr = self.initial.to_array();
        if arr.iter().any(|v| !(*v >= T::zero())) {
            return Err(Error::InvalidInput("initial compartments must be >= 0".into()));
        }
        let total = self.initial.total();
        let pop = self.params.population_total;
        if ((total - pop) / pop).abs() > T::lit(1e-9) {
            return Err(Error::InvalidInput(format!(
                "initial compartments sum to {total}, population is {pop}"
            )));
        }
        Ok(())
    }
}

/// Which compartments count as deaths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeathMeasure {
    /// Quarantined, zombified and removed.
    #[default]
    Lost,
    RemovedOnly,
}

impl DeathMeasure {
    pub fn of<T: Real>(self, x: &PopulationState<T>) -> T {
        match self {
            DeathMeasure::Lost => x.lost(),
            DeathMeasure::RemovedOnly => x.r,
        }
    }
}

/// State slack in millions of persons below which negatives are clamped.
const NEGATIVE_SLACK_MILLIONS: f64 = 1e-12;

pub(crate) struct SzrSystem<T> {
    pub params: EpidemicParams<T>,
    slack: T,
}

impl<T: Real> SzrSystem<T> {
    pub fn new(params: EpidemicParams<T>) -> Self {
        let slack = params.units_from_millions(T::lit(NEGATIVE_SLACK_MILLIONS));
        Self { params, slack }
    }

    /// Clamps round-off negatives in the six compartments at the head of `y`.
    pub fn project(&self, t: T, y: &mut [T]) -> Result<()> {
        for (k, v) in y.iter_mut().take(6).enumerate() {
            if *v < T::zero() {
                if *v < -self.slack {
                    return Err(Error::NegativeCompartment {
                        compartment: COMPARTMENTS[k],
                        value: v.as_f64(),
                        t: t.as_f64(),
                    });
                }
                *v = T::zero();
            }
        }
        Ok(())
    }
}

impl<T: Real> OdeSystem<T> for SzrSystem<T> {
    fn dim(&self) -> usize {
        6
    }

    fn rate(&self, _t: T, y: &[T], dy: &mut [T]) -> Result<()> {
        let d = szr_derivative(&PopulationState::from_slice(y), &self.params);
        dy.copy_from_slice(&d.to_array());
        Ok(())
    }

    fn accept(&self, t: T, y: &mut [T]) -> Result<()> {
        self.project(t, y)
    }
}

/// Default step control for outbreak runs.
pub fn default_ode_options<T: Real>() -> OdeOptions<T> {
    OdeOptions::default().store_interval(T::lit(0.01))
}

/// A simulated outbreak: the compartment trajectory plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Outbreak<T> {
    pub params: EpidemicParams<T>,
    pub trajectory: Trajectory<T>,
}

impl<T: Real> Outbreak<T> {
    pub fn new(params: EpidemicParams<T>, trajectory: Trajectory<T>) -> Result<Self> {
        if trajectory.dim() != 6 {
            return Err(Error::InvalidInput(
                "outbreak trajectory must have six compartments".into(),
            ));
        }
        Ok(Self { params, trajectory })
    }

    pub fn state_at(&self, t: T) -> Result<PopulationState<T>> {
        Ok(PopulationState::from_slice(&self.trajectory.at(t)?))
    }

    pub fn final_state(&self) -> PopulationState<T> {
        PopulationState::from_slice(self.trajectory.last())
    }

    /// Deaths at `t`, in millions of persons.
    pub fn deaths(&self, t: T, measure: DeathMeasure) -> Result<T> {
        Ok(self.params.millions(measure.of(&self.state_at(t)?)))
    }

    /// `∫₀ᵗ Σ weights·x dt`, in person-days.
    pub fn person_days(&self, weights: [T; 6], t: T) -> Result<T> {
        Ok(self.trajectory.integral(&weights, t)? * self.params.persons_per_unit)
    }

    /// Compartments at `t` in persons.
    pub fn persons_at(&self, t: T) -> Result<PopulationState<T>> {
        Ok(self.state_at(t)?.scaled(self.params.persons_per_unit))
    }

    pub fn horizon(&self) -> T {
        self.trajectory.end()
    }
}

pub fn simulate<T: Real>(scenario: &Scenario<T>) -> Result<Outbreak<T>> {
    simulate_with(scenario, &default_ode_options())
}

pub fn simulate_with<T: Real>(scenario: &Scenario<T>, opts: &OdeOptions<T>) -> Result<Outbreak<T>> {
    scenario.validate()?;
    let sys = SzrSystem::new(scenario.params);
    let traj = integrate(
        &sys,
        &scenario.initial.to_array(),
        (T::zero(), scenario.horizon_days),
        opts,
    )?;
    Outbreak::new(scenario.params, traj)
}

/// Result of anchoring the initial zombie count to a published death toll.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedCalibration {
    /// Initial zombified population in model units.
    pub zombies_units: f64,
    pub zombies_millions: f64,
    pub anchor_deaths_millions: f64,
    pub achieved_deaths_millions: f64,
    pub measure: DeathMeasure,
}

/// Seed search bracket, millions of persons.
pub const SEED_BRACKET_MILLIONS: (f64, f64) = (1e-9, 1.0);

/// Finds the initial zombie count that reproduces `anchor_deaths` (millions)
/// at `horizon` under `params_at_anchor`.
pub fn calibrate_seed(
    params_at_anchor: &EpidemicParams<f64>,
    anchor_deaths: f64,
    horizon: f64,
    measure: DeathMeasure,
    opts: &OdeOptions<f64>,
) -> Result<SeedCalibration> {
    params_at_anchor.validate()?;
    if !(anchor_deaths >= 0.0) {
        return Err(Error::InvalidInput("anchor deaths must be >= 0".into()));
    }
    if anchor_deaths == 0.0 {
        return Ok(SeedCalibration {
            zombies_units: 0.0,
            zombies_millions: 0.0,
            anchor_deaths_millions: 0.0,
            achieved_deaths_millions: 0.0,
            measure,
        });
    }
    let deaths_for = |log_millions: f64| -> Result<f64> {
        let z0 = params_at_anchor.units_from_millions(10f64.powf(log_millions));
        let outbreak = simulate_with(&Scenario::seeded(*params_at_anchor, z0, horizon), opts)?;
        outbreak.deaths(horizon, measure)
    };
    let (lo, hi) = (SEED_BRACKET_MILLIONS.0.log10(), SEED_BRACKET_MILLIONS.1.log10());
    let log_seed = bisect(|x| Ok(deaths_for(x)? - anchor_deaths), lo, hi, 1e-9).map_err(|e| match e {
        Error::NoSignChange { g_lo, g_hi, .. } => Error::Calibration(format!(
            "anchor of {anchor_deaths} M deaths unreachable for seeds in [{}, {}] M (deaths span {:.6e} .. {:.6e} M)",
            SEED_BRACKET_MILLIONS.0,
            SEED_BRACKET_MILLIONS.1,
            g_lo + anchor_deaths,
            g_hi + anchor_deaths
        )),
        other => other,
    })?;
    let zombies_millions = 10f64.powf(log_seed);
    let achieved = deaths_for(log_seed)?;
    if ((achieved - anchor_deaths) / anchor_deaths).abs() > 1e-3 {
        return Err(Error::Calibration(format!(
            "seed search stalled at {achieved} M deaths against anchor {anchor_deaths} M"
        )));
    }
    Ok(SeedCalibration {
        zombies_units: params_at_anchor.units_from_millions(zombies_millions),
        zombies_millions,
        anchor_deaths_millions: anchor_deaths,
        achieved_deaths_millions: achieved,
        measure,
    })
}
