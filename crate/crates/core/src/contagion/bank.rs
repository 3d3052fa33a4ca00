use serde::{Deserialize, Serialize};

use crate::contagion::market::MarketParams;
use crate::error::{Error, Result};

pub const BANK_COUNT: usize = 6;
pub const BANK_NAMES: [&str; BANK_COUNT] = ["BAC", "C", "GS", "JPM", "MS", "WFC"];
/// Risk weights of each bank's loan book.
pub const LOAN_RISK_WEIGHTS: [f64; BANK_COUNT] = [0.8464, 0.8977, 0.7222, 0.7735, 0.7212, 0.8503];

/// Capital ratio the synthetic calibration starts every bank at: 25% above
/// the margin requirement.
pub const INITIAL_BUFFER: f64 = 1.25;

/// One bank's book. Holdings are in units where `holdings·q` is dollars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankBalanceSheet {
    pub name: String,
    pub holdings: Vec<f64>,
    pub cash: f64,
    pub liabilities: f64,
    pub loans: f64,
    pub loan_risk_weight: f64,
}

impl BankBalanceSheet {
    pub fn securities_value(&self, q: &[f64]) -> f64 {
        self.holdings.iter().zip(q).map(|(s, p)| s * p).sum()
    }

    /// `s·A·q`, the trading book's risk-weighted value.
    pub fn risk_weighted_securities(&self, alpha: &[f64], q: &[f64]) -> f64 {
        self.holdings
            .iter()
            .zip(alpha.iter().zip(q))
            .map(|(s, (a, p))| s * a * p)
            .sum()
    }

    pub fn validate(&self, assets: usize) -> Result<()> {
        if self.holdings.len() != assets {
            return Err(Error::InvalidInput(format!(
                "bank {} holds {} assets, market has {assets}",
                self.name,
                self.holdings.len()
            )));
        }
        let nonneg = self.holdings.iter().all(|v| *v >= 0.0)
            && self.cash >= 0.0
            && self.liabilities >= 0.0
            && self.loans >= 0.0
            && self.loan_risk_weight >= 0.0;
        if !nonneg {
            return Err(Error::InvalidInput(format!(
                "bank {} has a negative balance-sheet entry",
                self.name
            )));
        }
        Ok(())
    }
}

/// Equity over risk-weighted assets for a bank that has liquidated the
/// fraction `pi` of its trading book and raised `psi` dollars doing so.
pub fn capital_ratio(bank: &BankBalanceSheet, market: &MarketParams, q: &[f64], pi: f64, psi: f64) -> Result<f64> {
    if q.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::InvalidInput("capital_ratio: prices must be positive".into()));
    }
    let keep = 1.0 - pi;
    let equity = keep * bank.securities_value(q) + bank.cash + psi + bank.loans - bank.liabilities;
    let rwa = keep * bank.risk_weighted_securities(&market.alpha, q) + bank.loan_risk_weight * bank.loans;
    if !(rwa > 0.0) {
        return Err(Error::Degenerate(format!(
            "capital_ratio: bank {} has no risk-weighted assets",
            bank.name
        )));
    }
    Ok(equity / rwa)
}

/// The banking sector and the market it trades in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinancialSystem {
    pub banks: Vec<BankBalanceSheet>,
    pub market: MarketParams,
}

impl FinancialSystem {
    pub fn new(banks: Vec<BankBalanceSheet>, market: MarketParams) -> Result<Self> {
        let sys = Self { banks, market };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        if self.banks.is_empty() {
            return Err(Error::InvalidInput("financial system needs at least one bank".into()));
        }
        for b in &self.banks {
            b.validate(self.market.assets())?;
        }
        Ok(())
    }

    /// Capital ratios at the initial marks (`q = 1`, nothing sold).
    pub fn initial_capital_ratios(&self) -> Result<Vec<f64>> {
        let q = vec![1.0; self.market.assets()];
        self.banks
            .iter()
            .map(|b| capital_ratio(b, &self.market, &q, 0.0, 0.0))
            .collect()
    }
}

/// Knobs of the synthetic six-bank calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBanks {
    /// Fraction of every asset's capitalisation held by the bank sector.
    pub market_share: f64,
    /// Relative sizes of the banks; normalised internally.
    pub size_weights: Vec<f64>,
    pub loans_to_securities: f64,
    pub cash_to_securities: f64,
    /// Target capital ratio at `q = 1`; defaults to 1.25·θ_min.
    pub initial_capital_ratio: Option<f64>,
}

impl Default for SyntheticBanks {
    fn default() -> Self {
        Self {
            market_share: 1.0e-4,
            size_weights: vec![1.0; BANK_COUNT],
            loans_to_securities: 1.0,
            cash_to_securities: 0.05,
            initial_capital_ratio: None,
        }
    }
}

impl SyntheticBanks {
    /// Builds balance sheets holding the market portfolio pro rata, with
    /// liabilities set so each bank starts at the target capital ratio.
    pub fn build(&self, market: &MarketParams) -> Result<Vec<BankBalanceSheet>> {
        market.validate()?;
        let n_banks = self.size_weights.len();
        if n_banks == 0 || n_banks > BANK_COUNT {
            return Err(Error::InvalidInput(format!(
                "expected 1..={BANK_COUNT} bank size weights, got {n_banks}"
            )));
        }
        if self.size_weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidInput("bank size weights must be positive".into()));
        }
        if !(self.market_share > 0.0 && self.market_share <= 1.0) {
            return Err(Error::InvalidInput("market_share must lie in (0, 1]".into()));
        }
        if !(self.loans_to_securities >= 0.0) || !(self.cash_to_securities >= 0.0) {
            return Err(Error::InvalidInput("loan and cash ratios must be >= 0".into()));
        }
        let target = self.initial_capital_ratio.unwrap_or(INITIAL_BUFFER * market.theta_min);
        let total_weight: f64 = self.size_weights.iter().sum();
        let q = vec![1.0; market.assets()];
        let banks = self
            .size_weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let share = self.market_share * w / total_weight;
                let holdings: Vec<f64> = market.market_cap.iter().map(|m| share * m).collect();
                let securities: f64 = holdings.iter().sum();
                let loans = self.loans_to_securities * securities;
                let cash = self.cash_to_securities * securities;
                let mut bank = BankBalanceSheet {
                    name: BANK_NAMES[i].to_string(),
                    holdings,
                    cash,
                    liabilities: 0.0,
                    loans,
                    loan_risk_weight: LOAN_RISK_WEIGHTS[i],
                };
                let rwa = bank.risk_weighted_securities(&market.alpha, &q) + bank.loan_risk_weight * loans;
                bank.liabilities = securities + cash + loans - target * rwa;
                bank
            })
            .collect::<Vec<_>>();
        for b in &banks {
            if b.liabilities < 0.0 {
                return Err(Error::Calibration(format!(
                    "bank {} would need negative liabilities to reach capital ratio {target}",
                    b.name
                )));
            }
        }
        Ok(banks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contagion::market::{CapWeighting, RISK_WEIGHTS};
    use approx::assert_relative_eq;

    fn market() -> MarketParams {
        MarketParams::tabulated(&CapWeighting::InverseImpact, 1.0).unwrap()
    }

    #[test]
    fn no_liabilities_means_high_ratio() {
        let m = market();
        let bank = BankBalanceSheet {
            name: "X".into(),
            holdings: (0..16).map(|k| if RISK_WEIGHTS[k] < 1.0 { 1.0 } else { 0.0 }).collect(),
            cash: 0.0,
            liabilities: 0.0,
            loans: 0.0,
            loan_risk_weight: 0.8,
        };
        assert!(capital_ratio(&bank, &m, &[1.0; 16], 0.0, 0.0).unwrap() > 1.0);
    }

    #[test]
    fn single_asset_toy() {
        let m = MarketParams {
            alpha: vec![0.2],
            b: vec![0.1],
            market_cap: vec![1.0],
            theta_min: 0.1,
            impact_multiplier: 1.0,
        };
        let bank = BankBalanceSheet {
            name: "toy".into(),
            holdings: vec![1.0],
            cash: 0.0,
            liabilities: 0.9,
            loans: 0.0,
            loan_risk_weight: 0.0,
        };
        assert_relative_eq!(
            capital_ratio(&bank, &m, &[1.0], 0.0, 0.0).unwrap(),
            0.5,
            max_relative = 1e-12
        );
        let empty = BankBalanceSheet {
            holdings: vec![0.0],
            ..bank
        };
        assert!(matches!(
            capital_ratio(&empty, &m, &[1.0], 0.0, 0.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn synthetic_books_start_at_buffer() {
        let m = market();
        let banks = SyntheticBanks {
            size_weights: vec![3.0, 2.4, 1.1, 3.7, 1.2, 1.9],
            ..Default::default()
        }
        .build(&m)
        .unwrap();
        let sys = FinancialSystem::new(banks, m).unwrap();
        for theta in sys.initial_capital_ratios().unwrap() {
            assert!((theta - 0.125).abs() <= 1e-9);
        }
        let held: f64 = sys.banks.iter().map(|b| b.holdings.iter().sum::<f64>()).sum();
        assert_relative_eq!(held, 1.0e-4 * 30.42e12, max_relative = 1e-12);
    }

    #[test]
    fn synthetic_rejects_bad_knobs() {
        let m = market();
        let bad = SyntheticBanks {
            market_share: 0.0,
            ..Default::default()
        };
        assert!(bad.build(&m).is_err());
        let too_rich = SyntheticBanks {
            initial_capital_ratio: Some(50.0),
            ..Default::default()
        };
        assert!(matches!(too_rich.build(&m), Err(Error::Calibration(_))));
    }
}
