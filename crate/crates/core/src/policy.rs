//! Policy sweeps over the isolation/quarantine level `ι = ω`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contagion::{
    loan_writedowns, market_cap_loss, post_outbreak_firesale, simulate_contagion, ContagionOptions, ContagionRun,
    FinancialSystem, FireSaleResult, MarketParams, SyntheticBanks,
};
use crate::economy::{first_order_gdp_loss, EconomyParams, GdpLoss};
use crate::epidemic::{calibrate_seed, simulate_with, DeathMeasure, EpidemicParams, Scenario, SeedCalibration};
use crate::error::{Error, Result};
use crate::numerics::{bisect, FixedPointOptions, OdeOptions};
use crate::Outbreak;

/// Policy levels of the published summary table.
pub const TABLE2_GRID: [f64; 5] = [0.500, 0.322, 0.293, 0.274, 0.266];
/// Policy level whose death toll anchors the initial zombie count.
pub const ANCHOR_IOTA_OMEGA: f64 = 0.500;
/// Deaths at the anchor policy, millions.
pub const ANCHOR_DEATHS_MILLIONS: f64 = 0.016;
/// Share of a market-cap drop passed through to GDP.
pub const REGRESSION_FACTOR: f64 = 0.8;
pub const HORIZON_DAYS: f64 = 365.0;

/// Which GDP figure first-order losses are quoted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GdpBase {
    #[default]
    Flat,
    /// GDP grown at the baseline rate.
    Grown,
}

/// Everything needed to run the epidemic → economy → banks pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Disease rates; `ι` and `ω` are replaced by each policy level.
    pub epidemic: EpidemicParams<f64>,
    pub economy: EconomyParams,
    pub financial: FinancialSystem,
    /// Initial zombies, model units.
    pub seed_units: f64,
    pub horizon_days: f64,
    pub death_measure: DeathMeasure,
    pub gdp_base: GdpBase,
    pub contagion: ContagionOptions,
    pub fire_sale: FixedPointOptions<f64>,
}

impl PipelineConfig {
    /// Default parameters with the synthetic banks and the given seed.
    pub fn with_seed(seed_units: f64) -> Result<Self> {
        let market = MarketParams::calibrated();
        let banks = SyntheticBanks::default().build(&market)?;
        Ok(Self {
            epidemic: EpidemicParams::calibrated(),
            economy: EconomyParams::default(),
            financial: FinancialSystem::new(banks, market)?,
            seed_units,
            horizon_days: HORIZON_DAYS,
            death_measure: DeathMeasure::default(),
            gdp_base: GdpBase::default(),
            contagion: ContagionOptions::default(),
            fire_sale: FixedPointOptions::default(),
        })
    }

    /// Default parameters with the seed fitted to the anchor row.
    pub fn calibrated() -> Result<Self> {
        let mut config = Self::with_seed(0.0)?;
        let seed = config.calibrate_seed(ANCHOR_IOTA_OMEGA, ANCHOR_DEATHS_MILLIONS)?;
        config.seed_units = seed.zombies_units;
        Ok(config)
    }

    pub fn ode(&self) -> &OdeOptions<f64> {
        &self.contagion.ode
    }

    /// Fits the seed so that policy `iota_omega` kills `deaths` million.
    pub fn calibrate_seed(&self, iota_omega: f64, deaths: f64) -> Result<SeedCalibration> {
        let params = self.epidemic.with_policy(iota_omega);
        calibrate_seed(&params, deaths, self.horizon_days, self.death_measure, self.ode())
    }

    pub fn scenario(&self, iota_omega: f64) -> Scenario<f64> {
        Scenario::seeded(
            self.epidemic.with_policy(iota_omega),
            self.seed_units,
            self.horizon_days,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.epidemic.validate()?;
        self.economy.validate()?;
        self.financial.validate()?;
        if !(self.seed_units > 0.0) || !self.seed_units.is_finite() {
            return Err(Error::InvalidInput(format!(
                "seed must be positive, got {}",
                self.seed_units
            )));
        }
        if !(self.horizon_days > 0.0) || !self.horizon_days.is_finite() {
            return Err(Error::InvalidInput("horizon must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the policy table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyPoint {
    pub iota_omega: f64,
    pub deaths_millions: f64,
    /// Against the configured GDP base.
    pub first_order_gdp_loss_pct: f64,
    pub first_order_gdp_loss_flat_pct: f64,
    pub first_order_gdp_loss_grown_pct: f64,
    pub regressed_gdp_loss_pct: f64,
    pub market_cap_loss_pct: f64,
    /// Market-cap loss at the horizon before the closing fire sale.
    pub outbreak_market_cap_loss_pct: f64,
}

/// Long-run GDP damage implied by a market-cap drop.
pub fn regressed_gdp_loss(market_cap_loss_pct: f64) -> f64 {
    REGRESSION_FACTOR * market_cap_loss_pct
}

/// Full output of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub point: PolicyPoint,
    pub contagion: ContagionRun,
    pub gdp: GdpLoss,
    pub fire_sale: FireSaleResult,
}

impl PipelineRun {
    pub fn outbreak(&self) -> &Outbreak {
        &self.contagion.outbreak
    }
}

/// Runs outbreak, non-bank selling, margin calls and the closing fire sale
/// at one policy level.
pub fn run_pipeline(iota_omega: f64, config: &PipelineConfig) -> Result<PipelineRun> {
    if !(iota_omega >= 0.0) || !iota_omega.is_finite() {
        return Err(Error::InvalidInput(format!(
            "policy level must be >= 0, got {iota_omega}"
        )));
    }
    run_scenario(&config.epidemic.with_policy(iota_omega), config)
}

/// [`run_pipeline`] with explicit epidemic rates, so `ι` and `ω` may
/// differ. The row's `iota_omega` reports `ι`.
pub fn run_scenario(params: &EpidemicParams<f64>, config: &PipelineConfig) -> Result<PipelineRun> {
    config.validate()?;
    let t = config.horizon_days;
    let iota_omega = params.iota;
    let scenario = Scenario::seeded(*params, config.seed_units, t);
    let run = simulate_contagion(&scenario, &config.financial, &config.economy, &config.contagion)?;
    let gdp = first_order_gdp_loss(&run.outbreak, t, &config.economy)?;
    let mu = loan_writedowns(&run.outbreak, t, &config.financial, &config.economy)?;
    let fire_sale = post_outbreak_firesale(&config.financial, &run.final_state, &mu, &config.fire_sale)?;
    let q0 = vec![1.0; config.financial.market.assets()];
    let caps = &config.financial.market.market_cap;
    let market = market_cap_loss(&q0, &fire_sale.q_star, caps)?;
    let outbreak_market = market_cap_loss(&q0, &run.final_state.q, caps)?;
    let point = PolicyPoint {
        iota_omega,
        deaths_millions: run.outbreak.deaths(t, config.death_measure)?,
        first_order_gdp_loss_pct: match config.gdp_base {
            GdpBase::Flat => gdp.percent,
            GdpBase::Grown => gdp.percent_of_grown,
        },
        first_order_gdp_loss_flat_pct: gdp.percent,
        first_order_gdp_loss_grown_pct: gdp.percent_of_grown,
        regressed_gdp_loss_pct: regressed_gdp_loss(market),
        market_cap_loss_pct: market,
        outbreak_market_cap_loss_pct: outbreak_market,
    };
    Ok(PipelineRun {
        point,
        contagion: run,
        gdp,
        fire_sale,
    })
}

pub fn run_policy(iota_omega: f64, config: &PipelineConfig) -> Result<PolicyPoint> {
    Ok(run_pipeline(iota_omega, config)?.point)
}

/// Deaths at the horizon under `iota_omega`; epidemic only.
pub fn deaths_at(iota_omega: f64, config: &PipelineConfig) -> Result<f64> {
    let outbreak = simulate_with(&config.scenario(iota_omega), config.ode())?;
    outbreak.deaths(config.horizon_days, config.death_measure)
}

/// Policy level at which the outbreak kills `target` million by the horizon.
pub fn find_policy_for_deaths(target: f64, bracket: (f64, f64), config: &PipelineConfig) -> Result<f64> {
    if !(target >= 0.0) {
        return Err(Error::InvalidInput("target deaths must be >= 0".into()));
    }
    let (lo, hi) = bracket;
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::InvalidInput(format!("policy bracket [{lo}, {hi}] is invalid")));
    }
    let level = bisect(|x| Ok(deaths_at(x, config)? - target), lo, hi, 1e-9).map_err(|e| match e {
        Error::NoSignChange { g_lo, g_hi, .. } => Error::Calibration(format!(
            "no policy in [{lo}, {hi}] kills {target} M (deaths span {:.6} .. {:.6} M)",
            g_lo + target,
            g_hi + target
        )),
        other => other,
    })?;
    let achieved = deaths_at(level, config)?;
    if target > 0.0 && ((achieved - target) / target).abs() > 1e-3 {
        return Err(Error::Calibration(format!(
            "policy {level} kills {achieved} M, target {target} M"
        )));
    }
    Ok(level)
}

/// Runs every grid point on a pool of `jobs` threads. Rows come back in
/// grid order; a failing row does not stop the others.
pub fn sweep(grid: &[f64], config: &PipelineConfig, jobs: usize) -> Result<Vec<Result<PolicyPoint>>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("policy grid is empty".into()));
    }
    if jobs == 0 {
        return Err(Error::InvalidInput("jobs must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| grid.par_iter().map(|x| run_policy(*x, config)).collect()))
}
