//! Margin-call liquidations by banks during the outbreak and the fire sale
//! that follows once loan writedowns land.

pub mod bank;
pub mod dynamics;
pub mod firesale;
pub mod market;

pub use bank::{capital_ratio, BankBalanceSheet, FinancialSystem, SyntheticBanks, BANK_NAMES};
pub use dynamics::{
    capital_ratios, lambda_matrix, loan_writedowns, simulate_contagion, ContagionOptions, ContagionRun, ContagionState,
};
pub use firesale::{post_outbreak_firesale, shortfalls, FireSaleResult};
pub use market::{market_cap_loss, CapWeighting, MarketParams};
