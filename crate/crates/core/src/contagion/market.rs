use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ASSET_COUNT: usize = 16;

/// Regulatory risk weights of the sixteen marketable assets.
pub const RISK_WEIGHTS: [f64; ASSET_COUNT] = [
    0.07, 0.08, 0.1, 0.12, 0.15, 0.18, 0.2, 0.25, 0.35, 0.5, 0.6, 0.75, 1.0, 2.5, 4.25, 6.5,
];

/// Price-impact coefficients in units of [`IMPACT_UNIT`].
pub const IMPACTS: [f64; ASSET_COUNT] = [
    2.20, 2.52, 3.17, 3.83, 4.84, 5.86, 6.56, 8.35, 12.11, 18.28, 22.78, 30.18, 44.55, 249.16, 1_625.30, 15_690.21,
];

pub const IMPACT_UNIT: f64 = 1e-23;

/// Total capitalisation of the marketable assets, dollars.
pub const TOTAL_MARKET_CAP: f64 = 30.42e12;

/// Margin requirement on the capital ratio.
pub const THETA_MIN: f64 = 0.1;

/// Scale applied to the tabulated impacts in the default calibration. At
/// face value the impacts move prices by under 1e-9 for any plausible
/// dollar volume.
pub const DEFAULT_IMPACT_MULTIPLIER: f64 = 9.0e10;

/// Default split of the capitalisation: `M ∝ b^(−0.2)`.
pub const DEFAULT_CAP_EXPONENT: f64 = 0.2;

/// How [`TOTAL_MARKET_CAP`] is split across assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapWeighting {
    /// Capitalisation proportional to `1/b`, i.e. equal market depth `b·M`.
    InverseImpact,
    Equal,
    /// Capitalisation proportional to `b^(−exponent)`.
    ImpactPower(f64),
    /// Explicit capitalisations in dollars.
    Explicit(Vec<f64>),
}

/// Per-asset market description. Prices are indices starting at 1, so
/// `market_cap` carries all dollar scale and `b` acts on dollar volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub alpha: Vec<f64>,
    /// Effective impact coefficients, per dollar.
    pub b: Vec<f64>,
    pub market_cap: Vec<f64>,
    pub theta_min: f64,
    /// Factor applied to the tabulated impacts to get `b`.
    pub impact_multiplier: f64,
}

impl MarketParams {
    /// Tabulated risk weights and impacts with the chosen split of the
    /// total capitalisation.
    pub fn tabulated(weighting: &CapWeighting, impact_multiplier: f64) -> Result<Self> {
        let b: Vec<f64> = IMPACTS.iter().map(|v| v * IMPACT_UNIT * impact_multiplier).collect();
        let power = |p: f64| -> Vec<f64> {
            let w: Vec<f64> = IMPACTS.iter().map(|v| v.powf(-p)).collect();
            let sum: f64 = w.iter().sum();
            w.iter().map(|w| TOTAL_MARKET_CAP * w / sum).collect()
        };
        let market_cap = match weighting {
            CapWeighting::InverseImpact => power(1.0),
            CapWeighting::Equal => vec![TOTAL_MARKET_CAP / ASSET_COUNT as f64; ASSET_COUNT],
            CapWeighting::ImpactPower(p) => {
                if !p.is_finite() {
                    return Err(Error::InvalidInput("cap weighting exponent must be finite".into()));
                }
                power(*p)
            }
            CapWeighting::Explicit(caps) => caps.clone(),
        };
        let market = Self {
            alpha: RISK_WEIGHTS.to_vec(),
            b,
            market_cap,
            theta_min: THETA_MIN,
            impact_multiplier,
        };
        market.validate()?;
        Ok(market)
    }

    /// The default calibrated market.
    pub fn calibrated() -> Self {
        Self::tabulated(
            &CapWeighting::ImpactPower(DEFAULT_CAP_EXPONENT),
            DEFAULT_IMPACT_MULTIPLIER,
        )
        .expect("default market parameters are valid")
    }

    pub fn assets(&self) -> usize {
        self.alpha.len()
    }

    pub fn total_cap(&self) -> f64 {
        self.market_cap.iter().sum()
    }

    /// Current market value `Mᵀq`.
    pub fn value(&self, q: &[f64]) -> f64 {
        self.market_cap.iter().zip(q).map(|(m, p)| m * p).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.alpha.len();
        if n == 0 || self.b.len() != n || self.market_cap.len() != n {
            return Err(Error::InvalidInput(format!(
                "market vectors disagree in length (alpha {n}, b {}, M {})",
                self.b.len(),
                self.market_cap.len()
            )));
        }
        if !(self.theta_min > 0.0 && self.theta_min < 1.0) {
            return Err(Error::InvalidInput("theta_min must lie in (0, 1)".into()));
        }
        for k in 0..n {
            if !(self.alpha[k] >= 0.0) || self.alpha[k] * self.theta_min >= 1.0 {
                return Err(Error::InvalidInput(format!(
                    "asset {} risk weight {} must satisfy 0 <= alpha < 1/theta_min",
                    k + 1,
                    self.alpha[k]
                )));
            }
            if !(self.b[k] > 0.0) || !self.b[k].is_finite() {
                return Err(Error::InvalidInput(format!("asset {} impact must be positive", k + 1)));
            }
            if !(self.market_cap[k] > 0.0) || !self.market_cap[k].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "asset {} capitalisation must be positive",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

/// Percentage drop in total market capitalisation from `q0` to `q_star`.
pub fn market_cap_loss(q0: &[f64], q_star: &[f64], market_cap: &[f64]) -> Result<f64> {
    if q0.len() != q_star.len() || q0.len() != market_cap.len() {
        return Err(Error::InvalidInput("market_cap_loss: length mismatch".into()));
    }
    if q0.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput(
            "market_cap_loss: reference prices must be positive".into(),
        ));
    }
    let total: f64 = market_cap.iter().sum();
    let now: f64 = market_cap
        .iter()
        .zip(q_star.iter().zip(q0))
        .map(|(m, (qs, q))| m * qs / q)
        .sum();
    Ok(100.0 * (1.0 - now / total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tabulated_values_are_ordered() {
        assert!(RISK_WEIGHTS.windows(2).all(|w| w[1] > w[0]));
        assert!(IMPACTS.windows(2).all(|w| w[1] > w[0]));
        for weighting in [
            CapWeighting::InverseImpact,
            CapWeighting::Equal,
            CapWeighting::ImpactPower(0.2),
        ] {
            let m = MarketParams::tabulated(&weighting, 1.0).unwrap();
            assert_relative_eq!(m.total_cap(), TOTAL_MARKET_CAP, max_relative = 1e-12);
        }
    }

    #[test]
    fn inverse_impact_gives_uniform_depth() {
        let m = MarketParams::tabulated(&CapWeighting::InverseImpact, 1e11).unwrap();
        let depth: Vec<f64> = m.b.iter().zip(&m.market_cap).map(|(b, c)| b * c).collect();
        for d in &depth {
            assert_relative_eq!(*d, depth[0], max_relative = 1e-12);
        }
    }

    #[test]
    fn power_weighting_endpoints() {
        let flat = MarketParams::tabulated(&CapWeighting::ImpactPower(0.0), 1.0).unwrap();
        let equal = MarketParams::tabulated(&CapWeighting::Equal, 1.0).unwrap();
        let inv = MarketParams::tabulated(&CapWeighting::InverseImpact, 1.0).unwrap();
        let one = MarketParams::tabulated(&CapWeighting::ImpactPower(1.0), 1.0).unwrap();
        for k in 0..ASSET_COUNT {
            assert_relative_eq!(flat.market_cap[k], equal.market_cap[k], max_relative = 1e-12);
            assert_relative_eq!(one.market_cap[k], inv.market_cap[k], max_relative = 1e-12);
        }
    }

    #[test]
    fn loss_examples() {
        let caps = [1.0, 2.0, 3.0];
        assert_eq!(market_cap_loss(&[1.0; 3], &[1.0; 3], &caps).unwrap(), 0.0);
        assert_relative_eq!(
            market_cap_loss(&[1.0; 3], &[0.5; 3], &caps).unwrap(),
            50.0,
            max_relative = 1e-14
        );
        assert!(market_cap_loss(&[0.0; 3], &[0.5; 3], &caps).is_err());
    }

    #[test]
    fn validation() {
        let mut m = MarketParams::tabulated(&CapWeighting::Equal, 1.0).unwrap();
        m.b[3] = 0.0;
        assert!(m.validate().is_err());
        let bad = MarketParams::tabulated(&CapWeighting::Explicit(vec![1.0; 3]), 1.0);
        assert!(bad.is_err());
    }
}
