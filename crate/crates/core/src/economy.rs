//! First-order GDP losses and non-bank cash raising during an outbreak.
//!
//! Annual income, profit and debt-service figures are converted to daily
//! flows (divided by 365) throughout. Compartments are converted from model
//! units to persons here; every dollar figure is an absolute national total.

use serde::{Deserialize, Serialize};

use crate::epidemic::{Outbreak, PopulationState};
use crate::error::{Error, Result};

pub const DAYS_PER_YEAR: f64 = 365.0;

/// National-accounts constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconomyParams {
    /// Annual GDP, dollars.
    pub gdp_total: f64,
    /// Persons.
    pub population: f64,
    /// Consensus annual growth used for the grown-GDP base.
    pub baseline_growth: f64,
    pub household_debt_stock: f64,
    /// Annual household debt payments, dollars.
    pub household_debt_service: f64,
    /// Annual after-tax income per earner, dollars.
    pub after_tax_income: f64,
    /// Annual business profit per person, dollars.
    pub business_profit_per_capita: f64,
    pub business_debt_stock: f64,
    /// Debt service coverage ratio businesses maintain.
    pub dscr: f64,
}

impl Default for EconomyParams {
    fn default() -> Self {
        Self {
            gdp_total: 21.73e12,
            population: 330e6,
            baseline_growth: 0.02,
            household_debt_stock: 16.58e12,
            household_debt_service: 1.35e12,
            after_tax_income: 51_428.0,
            business_profit_per_capita: 25_000.0,
            business_debt_stock: 29.45e12,
            dscr: 1.35,
        }
    }
}

impl EconomyParams {
    pub fn gdp_per_capita(&self) -> f64 {
        self.gdp_total / self.population
    }

    /// Business debt per person grossed up by the coverage ratio
    /// (≈ $120,477 at the defaults).
    pub fn business_debt_per_capita_grossed(&self) -> f64 {
        self.dscr * self.business_debt_stock / self.population
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gdp_total", self.gdp_total),
            ("population", self.population),
            ("household_debt_stock", self.household_debt_stock),
            ("household_debt_service", self.household_debt_service),
            ("after_tax_income", self.after_tax_income),
            ("business_profit_per_capita", self.business_profit_per_capita),
            ("business_debt_stock", self.business_debt_stock),
            ("dscr", self.dscr),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.baseline_growth.is_finite() || self.baseline_growth <= -1.0 {
            return Err(Error::InvalidInput("baseline_growth must exceed -1".into()));
        }
        Ok(())
    }
}

/// Lost productivity over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdpLoss {
    pub dollars: f64,
    /// Against flat GDP.
    pub percent: f64,
    /// Against GDP grown at the baseline rate.
    pub percent_of_grown: f64,
}

const I: [f64; 6] = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
const LOST: [f64; 6] = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
const OUT_OF_ECONOMY: [f64; 6] = [0.0, 1.0, 0.0, 1.0, 1.0, 1.0];

fn check_horizon(outbreak: &Outbreak<f64>, t: f64) -> Result<()> {
    if !(t >= 0.0) || t > outbreak.horizon() * (1.0 + 1e-12) {
        return Err(Error::OutOfRange {
            t,
            start: 0.0,
            end: outbreak.horizon(),
        });
    }
    Ok(())
}

/// `(1/365)∫₀ᴴ (I+Q+Z+R) dt × GDP per capita`.
pub fn first_order_gdp_loss(outbreak: &Outbreak<f64>, horizon: f64, params: &EconomyParams) -> Result<GdpLoss> {
    check_horizon(outbreak, horizon)?;
    let person_years = outbreak.person_days(OUT_OF_ECONOMY, horizon)? / DAYS_PER_YEAR;
    let dollars = person_years * params.gdp_per_capita();
    Ok(GdpLoss {
        dollars,
        percent: 100.0 * dollars / params.gdp_total,
        percent_of_grown: 100.0 * dollars / (params.gdp_total * (1.0 + params.baseline_growth)),
    })
}

/// Household debt written off by day `t` because of lost borrowers: missed
/// payments while lost plus the outstanding balance at `t`.
pub fn household_writedown(outbreak: &Outbreak<f64>, t: f64, params: &EconomyParams) -> Result<f64> {
    check_horizon(outbreak, t)?;
    let daily_service = params.household_debt_service / (params.population * DAYS_PER_YEAR);
    let balance = params.household_debt_stock / params.population - daily_service * t;
    let flow = outbreak.person_days(LOST, t)? * daily_service;
    let stock = outbreak.persons_at(t)?.lost() * balance;
    Ok(flow + stock)
}

/// Assets sold by isolated individuals to replace lost income up to day `t`.
pub fn isolated_liquidation(outbreak: &Outbreak<f64>, t: f64, params: &EconomyParams) -> Result<f64> {
    check_horizon(outbreak, t)?;
    Ok(outbreak.person_days(I, t)? * params.after_tax_income / DAYS_PER_YEAR)
}

/// Assets sold by businesses to hold their coverage ratio up to day `t`.
pub fn business_liquidation(outbreak: &Outbreak<f64>, t: f64, params: &EconomyParams) -> Result<f64> {
    check_horizon(outbreak, t)?;
    let daily_profit = params.business_profit_per_capita / DAYS_PER_YEAR;
    let flow = outbreak.person_days(OUT_OF_ECONOMY, t)? * daily_profit;
    let stock = outbreak.persons_at(t)?.lost() * (params.business_debt_per_capita_grossed() - daily_profit * t);
    Ok((flow + stock) / params.dscr)
}

/// Dollars per day the non-bank sector sells at day `t`; the exact time
/// derivative of [`isolated_liquidation`] + [`business_liquidation`].
///
/// `state` and `rate` are in persons and persons per day.
pub fn liquidation_flow(
    state: &PopulationState<f64>,
    rate: &PopulationState<f64>,
    t: f64,
    params: &EconomyParams,
) -> f64 {
    let daily_income = params.after_tax_income / DAYS_PER_YEAR;
    let daily_profit = params.business_profit_per_capita / DAYS_PER_YEAR;
    let newly_lost = rate.q + rate.z + rate.r;
    let business = daily_profit * state.i + (params.business_debt_per_capita_grossed() - daily_profit * t) * newly_lost;
    daily_income * state.i + business / params.dscr
}

/// Non-bank market selling intensity: the fraction of total market value
/// liquidated per day.
pub fn eta_dot(
    state: &PopulationState<f64>,
    rate: &PopulationState<f64>,
    t: f64,
    market_value: f64,
    params: &EconomyParams,
) -> Result<f64> {
    if !(market_value > 0.0) {
        return Err(Error::Degenerate(format!("eta_dot: market value {market_value}")));
    }
    Ok(liquidation_flow(state, rate, t, params) / market_value)
}
