use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::contagion::bank::{capital_ratio, FinancialSystem};
use crate::economy::{household_writedown, liquidation_flow, EconomyParams};
use crate::epidemic::{default_ode_options, szr_derivative, Outbreak, PopulationState, Scenario, SzrSystem};
use crate::error::{Error, Result};
use crate::numerics::{integrate, OdeOptions, OdeSystem, Trajectory};

/// Bank-sector state during the outbreak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContagionState {
    /// Fraction of each bank's initial trading book already sold.
    pub pi: Vec<f64>,
    /// Price index of each asset.
    pub q: Vec<f64>,
    /// Cash each bank has raised by selling.
    pub psi: Vec<f64>,
    /// Cumulative non-bank liquidation, as a fraction of market value.
    pub eta: f64,
}

impl ContagionState {
    pub fn initial(banks: usize, assets: usize) -> Self {
        Self {
            pi: vec![0.0; banks],
            q: vec![1.0; assets],
            psi: vec![0.0; banks],
            eta: 0.0,
        }
    }

    /// Unpacks `[Π | q | Ψ/book | η]`, where `book` is each bank's initial
    /// trading-book value.
    fn unpack(y: &[f64], books: &[f64], assets: usize) -> Self {
        let banks = books.len();
        Self {
            pi: y[..banks].to_vec(),
            q: y[banks..banks + assets].to_vec(),
            psi: y[banks + assets..2 * banks + assets]
                .iter()
                .zip(books)
                .map(|(v, b)| v * b)
                .collect(),
            eta: y[2 * banks + assets],
        }
    }

    fn pack(&self, books: &[f64], y: &mut Vec<f64>) {
        y.extend_from_slice(&self.pi);
        y.extend_from_slice(&self.q);
        y.extend(self.psi.iter().zip(books).map(|(v, b)| v / b));
        y.push(self.eta);
    }
}

/// Capital ratio of every bank in the given state.
pub fn capital_ratios(system: &FinancialSystem, q: &[f64], pi: &[f64], psi: &[f64]) -> Result<Vec<f64>> {
    system
        .banks
        .iter()
        .enumerate()
        .map(|(i, b)| capital_ratio(b, &system.market, q, pi[i], psi[i]))
        .collect()
}

/// Sales response of breaching banks to price moves: `Π̇ = −Λ q̇`.
///
/// Row `i` is zero unless `theta[i] ≤ θ_min·(1 + tolerance)`. A breaching
/// bank sells exactly enough to hold its capital ratio at `θ_min`.
pub fn lambda_matrix(
    system: &FinancialSystem,
    q: &[f64],
    pi: &[f64],
    theta: &[f64],
    tolerance: f64,
) -> Result<DMatrix<f64>> {
    let market = &system.market;
    let n = market.assets();
    let mut lambda = DMatrix::zeros(system.banks.len(), n);
    for (i, bank) in system.banks.iter().enumerate() {
        if theta[i] > market.theta_min * (1.0 + tolerance) {
            continue;
        }
        let denom = bank.risk_weighted_securities(&market.alpha, q) * market.theta_min;
        if !(denom > 0.0) {
            return Err(Error::Degenerate(format!(
                "bank {} breaches with no risk-weighted securities",
                bank.name
            )));
        }
        let keep = 1.0 - pi[i];
        for k in 0..n {
            lambda[(i, k)] = keep * bank.holdings[k] * (1.0 - market.alpha[k] * market.theta_min) / denom;
        }
    }
    Ok(lambda)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContagionOptions {
    /// When false, banks never sell during the outbreak.
    pub breaches_enabled: bool,
    /// Relative band above `θ_min` still treated as a breach; absorbs the
    /// integrator's drift along the constraint.
    pub breach_tolerance: f64,
    /// Short-term funding works, so nobody sells during the outbreak.
    pub repo_liquid: bool,
    pub ode: OdeOptions<f64>,
}

impl Default for ContagionOptions {
    fn default() -> Self {
        Self {
            breaches_enabled: true,
            breach_tolerance: 1e-9,
            repo_liquid: false,
            ode: default_ode_options(),
        }
    }
}

/// Epidemic and bank sector integrated together.
struct CoupledSystem<'a> {
    epi: SzrSystem<f64>,
    fin: &'a FinancialSystem,
    econ: &'a EconomyParams,
    opts: &'a ContagionOptions,
    books: Vec<f64>,
    initial_value: f64,
    pi_tolerance: f64,
}

/// Market value, relative to the start, below which the run is abandoned.
const MARKET_FLOOR: f64 = 1e-9;

impl CoupledSystem<'_> {
    fn banks(&self) -> usize {
        self.fin.banks.len()
    }

    fn assets(&self) -> usize {
        self.fin.market.assets()
    }

    fn eta_rate(&self, t: f64, y: &[f64], epi_rate: &[f64], q: &[f64]) -> Result<f64> {
        if self.opts.repo_liquid {
            return Ok(0.0);
        }
        let scale = self.epi.params.persons_per_unit;
        let state = PopulationState::from_slice(&y[..6]).scaled(scale);
        let rate = PopulationState::from_slice(epi_rate).scaled(scale);
        let value = self.fin.market.value(q);
        let fraction = value / self.initial_value;
        if !(fraction > MARKET_FLOOR) {
            return Err(Error::MarketExhausted { t, fraction });
        }
        Ok(liquidation_flow(&state, &rate, t, self.econ) / value)
    }
}

impl OdeSystem<f64> for CoupledSystem<'_> {
    fn dim(&self) -> usize {
        6 + 2 * self.banks() + self.assets() + 1
    }

    fn rate(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let (nb, na) = (self.banks(), self.assets());
        let d = szr_derivative(&PopulationState::from_slice(&y[..6]), &self.epi.params).to_array();
        dy[..6].copy_from_slice(&d);

        let fin = &y[6..];
        let pi = &fin[..nb];
        // Trial stages may overshoot below zero; rates use the clamped value.
        let q_eff: Vec<f64> = fin[nb..nb + na].iter().map(|p| p.max(f64::MIN_POSITIVE)).collect();
        let q = &q_eff[..];
        let psi: Vec<f64> = fin[nb + na..2 * nb + na]
            .iter()
            .zip(&self.books)
            .map(|(v, b)| v * b)
            .collect();
        let eta_dot = self.eta_rate(t, y, &d, q)?;
        let market = &self.fin.market;

        // Price pressure from non-bank sales: diag[−b q] M η̇.
        let push: Vec<f64> = (0..na)
            .map(|k| -market.b[k] * q[k] * market.market_cap[k] * eta_dot)
            .collect();
        let out = &mut dy[6..];
        out.fill(0.0);

        let lambda = if self.opts.breaches_enabled && eta_dot != 0.0 {
            let theta = capital_ratios(self.fin, q, pi, &psi)?;
            let l = lambda_matrix(self.fin, q, pi, &theta, self.opts.breach_tolerance)?;
            if l.iter().any(|v| *v != 0.0) {
                Some(l)
            } else {
                None
            }
        } else {
            None
        };

        let q_dot = match &lambda {
            None => DVector::from_vec(push),
            Some(l) => {
                // (I + diag[−b q] sᵀ Λ) q̇ = diag[−b q] M η̇
                let s = DMatrix::from_fn(nb, na, |i, k| self.fin.banks[i].holdings[k]);
                let d = DMatrix::from_diagonal(&DVector::from_fn(na, |k, _| -market.b[k] * q[k]));
                let system = DMatrix::identity(na, na) + &d * s.transpose() * l;
                system
                    .lu()
                    .solve(&DVector::from_vec(push))
                    .ok_or(Error::SingularSystem("price response of margin-called banks"))?
            }
        };
        for k in 0..na {
            out[nb + k] = q_dot[k];
        }
        if let Some(l) = &lambda {
            let pi_dot = -(l * &q_dot);
            for i in 0..nb {
                if pi_dot[i] < 0.0 && pi_dot[i] < -1e-12 * pi_dot.amax() {
                    return Err(Error::SingularSystem("margin-call feedback (loop gain above one)"));
                }
                let book: f64 = self.fin.banks[i].holdings.iter().zip(q).map(|(s, p)| s * p).sum();
                out[i] = pi_dot[i].max(0.0);
                out[nb + na + i] = out[i] * book / self.books[i];
            }
        }
        out[2 * nb + na] = eta_dot;
        Ok(())
    }

    fn accept(&self, t: f64, y: &mut [f64]) -> Result<()> {
        self.epi.project(t, y)?;
        let nb = self.banks();
        for i in 0..nb {
            let pi = y[6 + i];
            if pi > 1.0 + self.pi_tolerance {
                return Err(Error::TotalLiquidation {
                    bank: self.fin.banks[i].name.clone(),
                    pi,
                    t,
                });
            }
        }
        Ok(())
    }
}

/// A coupled outbreak and bank-sector run.
#[derive(Debug, Clone, PartialEq)]
pub struct ContagionRun {
    pub outbreak: Outbreak<f64>,
    /// Bank-sector components `[Π | q | Ψ/book | η]` on the integrator's
    /// grid; use [`ContagionRun::state_at`] for dollar values.
    pub trajectory: Trajectory<f64>,
    pub final_state: ContagionState,
    books: Vec<f64>,
    assets: usize,
}

impl ContagionRun {
    pub fn state_at(&self, t: f64) -> Result<ContagionState> {
        Ok(ContagionState::unpack(
            &self.trajectory.at(t)?,
            &self.books,
            self.assets,
        ))
    }

    pub fn horizon(&self) -> f64 {
        self.trajectory.end()
    }
}

/// Integrates the outbreak together with non-bank selling and margin-call
/// liquidations from day 0 to the scenario horizon.
pub fn simulate_contagion(
    scenario: &Scenario<f64>,
    system: &FinancialSystem,
    econ: &EconomyParams,
    opts: &ContagionOptions,
) -> Result<ContagionRun> {
    scenario.validate()?;
    system.validate()?;
    econ.validate()?;
    let (nb, na) = (system.banks.len(), system.market.assets());
    let q0 = vec![1.0; na];
    let books: Vec<f64> = system.banks.iter().map(|b| b.securities_value(&q0)).collect();
    if books.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("every bank needs a trading book".into()));
    }
    let coupled = CoupledSystem {
        epi: SzrSystem::new(scenario.params),
        fin: system,
        econ,
        opts,
        books: books.clone(),
        initial_value: system.market.value(&q0),
        pi_tolerance: 1e-9,
    };
    let mut y0 = scenario.initial.to_array().to_vec();
    ContagionState::initial(nb, na).pack(&books, &mut y0);
    let full = integrate(&coupled, &y0, (0.0, scenario.horizon_days), &opts.ode)?;
    let outbreak = Outbreak::new(scenario.params, full.project(0..6))?;
    let trajectory = full.project(6..full.dim());
    let final_state = ContagionState::unpack(trajectory.last(), &books, na);
    Ok(ContagionRun {
        outbreak,
        trajectory,
        final_state,
        books,
        assets: na,
    })
}

/// Household writedowns at `t` split across banks in proportion to their
/// loan books.
pub fn loan_writedowns(
    outbreak: &Outbreak<f64>,
    t: f64,
    system: &FinancialSystem,
    econ: &EconomyParams,
) -> Result<Vec<f64>> {
    let total: f64 = system.banks.iter().map(|b| b.loans).sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("loan_writedowns: banks hold no loans".into()));
    }
    let w = household_writedown(outbreak, t, econ)?;
    Ok(system.banks.iter().map(|b| b.loans / total * w).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contagion::bank::{BankBalanceSheet, SyntheticBanks};
    use crate::contagion::market::{CapWeighting, MarketParams};
    use crate::epidemic::EpidemicParams;
    use approx::assert_relative_eq;

    fn toy_system(s: f64) -> FinancialSystem {
        let market = MarketParams {
            alpha: vec![0.2],
            b: vec![0.1],
            market_cap: vec![1.0],
            theta_min: 0.1,
            impact_multiplier: 1.0,
        };
        let bank = BankBalanceSheet {
            name: "toy".into(),
            holdings: vec![s],
            cash: 0.0,
            liabilities: 0.0,
            loans: 1.0,
            loan_risk_weight: 0.5,
        };
        FinancialSystem::new(vec![bank], market).unwrap()
    }

    #[test]
    fn lambda_toy_value() {
        let sys = toy_system(2.0);
        let l = lambda_matrix(&sys, &[1.0], &[0.5], &[0.05], 0.0).unwrap();
        assert_relative_eq!(l[(0, 0)], 24.5, max_relative = 1e-12);
        let off = lambda_matrix(&sys, &[1.0], &[0.5], &[0.2], 0.0).unwrap();
        assert_eq!(off[(0, 0)], 0.0);
    }

    #[test]
    fn lambda_scales_with_remaining_book() {
        let sys = toy_system(2.0);
        let half = lambda_matrix(&sys, &[1.0], &[0.5], &[0.05], 0.0).unwrap();
        let full = lambda_matrix(&sys, &[1.0], &[0.0], &[0.05], 0.0).unwrap();
        assert_relative_eq!(full[(0, 0)], 2.0 * half[(0, 0)], max_relative = 1e-12);
    }

    #[test]
    fn repo_liquid_freezes_bank_sector() {
        let market = MarketParams::tabulated(&CapWeighting::InverseImpact, 1.8e11).unwrap();
        let banks = SyntheticBanks::default().build(&market).unwrap();
        let sys = FinancialSystem::new(banks, market).unwrap();
        let params = EpidemicParams::calibrated().with_policy(0.4);
        let scenario = Scenario::seeded(params, 1.0, 60.0);
        let opts = ContagionOptions {
            repo_liquid: true,
            ..Default::default()
        };
        let run = simulate_contagion(&scenario, &sys, &EconomyParams::default(), &opts).unwrap();
        assert_eq!(run.final_state, ContagionState::initial(6, 16));
    }

    #[test]
    fn writedowns_split_by_loans() {
        let market = MarketParams::tabulated(&CapWeighting::InverseImpact, 1.0).unwrap();
        let banks = SyntheticBanks::default().build(&market).unwrap();
        let sys = FinancialSystem::new(banks, market).unwrap();
        let params = EpidemicParams::calibrated();
        let z = 330_000.0;
        let traj = Trajectory::with_rates(
            vec![0.0, 365.0],
            vec![vec![0.0, 0.0, 0.0, 0.0, z, 0.0]; 2],
            vec![vec![0.0; 6]; 2],
        )
        .unwrap();
        let out = Outbreak::new(params, traj).unwrap();
        let mu = loan_writedowns(&out, 365.0, &sys, &EconomyParams::default()).unwrap();
        let each = 16.58e12 / 6.0;
        for m in &mu {
            assert_relative_eq!(*m, each, max_relative = 1e-12);
        }
    }
}
