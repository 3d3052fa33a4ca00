use serde::{Deserialize, Serialize};

use crate::contagion::bank::FinancialSystem;
use crate::contagion::dynamics::ContagionState;
use crate::error::{Error, Result};
use crate::numerics::{fixed_point, FixedPointOptions};

/// Outcome of the end-of-outbreak fire sale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireSaleResult {
    pub q_star: Vec<f64>,
    /// Average execution price of each asset during the sale.
    pub q_bar_star: Vec<f64>,
    /// Units of each asset each bank sells.
    pub gamma: Vec<Vec<f64>>,
    /// Fraction of its remaining book each bank sells.
    pub fractions: Vec<f64>,
    pub h: Vec<f64>,
    pub mu: Vec<f64>,
    pub iterations: usize,
}

/// What each bank owes beyond its cash, sale proceeds and margin-adjusted
/// loans once writedowns `mu` hit its loan book.
pub fn shortfalls(system: &FinancialSystem, state: &ContagionState, mu: &[f64]) -> Result<Vec<f64>> {
    if mu.len() != system.banks.len() {
        return Err(Error::InvalidInput("one writedown per bank expected".into()));
    }
    if mu.iter().any(|m| !(*m >= 0.0)) {
        return Err(Error::InvalidInput("writedowns must be >= 0".into()));
    }
    let theta = system.market.theta_min;
    Ok(system
        .banks
        .iter()
        .enumerate()
        .map(|(i, b)| b.liabilities - b.cash - state.psi[i] - (1.0 - b.loan_risk_weight * theta) * (b.loans - mu[i]))
        .collect())
}

/// Final and average execution prices after the banks sell `total[k]` units.
fn prices_after(q: &[f64], b: &[f64], total: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut q_star = Vec::with_capacity(q.len());
    let mut q_bar = Vec::with_capacity(q.len());
    for k in 0..q.len() {
        let x = b[k] * total[k];
        q_star.push(q[k] * (-x).exp());
        q_bar.push(if x > 0.0 { q[k] * (-(-x).exp_m1()) / x } else { q[k] });
    }
    (q_star, q_bar)
}

/// Solves the post-outbreak fire sale: every bank sells the smallest share
/// of its remaining book that restores `θ_min`, or all of it.
pub fn post_outbreak_firesale(
    system: &FinancialSystem,
    state: &ContagionState,
    mu: &[f64],
    opts: &FixedPointOptions<f64>,
) -> Result<FireSaleResult> {
    let market = &system.market;
    let (nb, na) = (system.banks.len(), market.assets());
    if state.q.len() != na || state.pi.len() != nb || state.psi.len() != nb {
        return Err(Error::InvalidInput(
            "contagion state does not match the financial system".into(),
        ));
    }
    let h = shortfalls(system, state, mu)?;
    let remaining: Vec<Vec<f64>> = system
        .banks
        .iter()
        .enumerate()
        .map(|(i, b)| b.holdings.iter().map(|s| (1.0 - state.pi[i]).max(0.0) * s).collect())
        .collect();
    let margin: Vec<f64> = market.alpha.iter().map(|a| 1.0 - a * market.theta_min).collect();

    let map = |c: &[f64]| -> Result<Vec<f64>> {
        let mut total = vec![0.0; na];
        for i in 0..nb {
            for k in 0..na {
                total[k] += c[i] * remaining[i][k];
            }
        }
        let (q_star, q_bar) = prices_after(&state.q, &market.b, &total);
        let mut next = Vec::with_capacity(nb);
        for i in 0..nb {
            let kept: f64 = (0..na).map(|k| q_star[k] * margin[k] * remaining[i][k]).sum();
            let gain: f64 = (0..na)
                .map(|k| (q_bar[k] - margin[k] * q_star[k]) * remaining[i][k])
                .sum();
            if gain < 0.0 {
                return Err(Error::Calibration(format!(
                    "fire sale: bank {} gains {gain} per unit sold",
                    system.banks[i].name
                )));
            }
            let need = h[i] - kept;
            let ci = if need <= 0.0 {
                0.0
            } else if gain == 0.0 {
                1.0
            } else {
                (need / gain).min(1.0)
            };
            next.push(ci);
        }
        Ok(next)
    };
    let solved = fixed_point(map, &vec![0.0; nb], opts)?;
    let fractions = solved.x;
    let gamma: Vec<Vec<f64>> = (0..nb)
        .map(|i| remaining[i].iter().map(|r| fractions[i] * r).collect())
        .collect();
    let total: Vec<f64> = (0..na).map(|k| gamma.iter().map(|g| g[k]).sum()).collect();
    let (q_star, q_bar_star) = prices_after(&state.q, &market.b, &total);
    Ok(FireSaleResult {
        q_star,
        q_bar_star,
        gamma,
        fractions,
        h,
        mu: mu.to_vec(),
        iterations: solved.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contagion::bank::BankBalanceSheet;
    use crate::contagion::market::MarketParams;
    use approx::assert_relative_eq;

    fn toy(liabilities: f64) -> FinancialSystem {
        toy_with_impact(liabilities, 0.1)
    }

    fn toy_with_impact(liabilities: f64, b: f64) -> FinancialSystem {
        let market = MarketParams {
            alpha: vec![0.2],
            b: vec![b],
            market_cap: vec![1.0],
            theta_min: 0.1,
            impact_multiplier: 1.0,
        };
        let bank = BankBalanceSheet {
            name: "toy".into(),
            holdings: vec![1.0],
            cash: 0.0,
            liabilities,
            loans: 0.0,
            loan_risk_weight: 0.0,
        };
        FinancialSystem::new(vec![bank], market).unwrap()
    }

    #[test]
    fn covered_shortfall_sells_nothing() {
        let sys = toy(0.05);
        let state = ContagionState::initial(1, 1);
        let r = post_outbreak_firesale(&sys, &state, &[0.0], &FixedPointOptions::default()).unwrap();
        assert_eq!(r.fractions, vec![0.0]);
        assert_eq!(r.q_star, vec![1.0]);
        assert_eq!(r.q_bar_star, vec![1.0]);
    }

    #[test]
    fn average_price_limit() {
        let (qs, qb) = prices_after(&[0.8], &[0.1], &[1e-12]);
        assert_relative_eq!(qb[0], 0.8, max_relative = 1e-12);
        assert!(qs[0] <= qb[0]);
    }

    #[test]
    fn partial_sale_restores_ratio() {
        // Shallow impact, so selling raises the ratio.
        let sys = toy_with_impact(0.981, 0.005);
        let state = ContagionState::initial(1, 1);
        let r = post_outbreak_firesale(&sys, &state, &[0.0], &FixedPointOptions::default()).unwrap();
        let c = r.fractions[0];
        assert!(c > 0.0 && c < 1.0);
        let residual = 0.98 * r.q_star[0] * (1.0 - c) + r.q_bar_star[0] * c - 0.981;
        assert!(residual.abs() < 1e-10);
    }

    #[test]
    fn hopeless_bank_sells_everything() {
        let sys = toy(5.0);
        let state = ContagionState::initial(1, 1);
        let r = post_outbreak_firesale(&sys, &state, &[0.0], &FixedPointOptions::default()).unwrap();
        assert_eq!(r.fractions, vec![1.0]);
        assert_relative_eq!(r.q_star[0], (-0.1f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn rejects_negative_writedowns() {
        let sys = toy(0.5);
        let state = ContagionState::initial(1, 1);
        assert!(post_outbreak_firesale(&sys, &state, &[-1.0], &FixedPointOptions::default()).is_err());
    }
}
