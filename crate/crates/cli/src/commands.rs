//! The four subcommands. Each returns the files it wrote.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use szr_core::contagion::{capital_ratios, BankBalanceSheet, FinancialSystem};
use szr_core::economy::EconomyParams;
use szr_core::epidemic::{DeathMeasure, EpidemicParams, SeedCalibration, COMPARTMENTS};
use szr_core::policy::{self, GdpBase, PipelineRun, PolicyPoint};

use crate::config::{BankSource, MarketKnobs, ScenarioConfig};
use crate::output::{Outputs, Table};
use crate::{CliError, CommonArgs, ConfigError};

/// Frozen seed and bank books, reusable through `--calibration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub seed: SeedCalibration,
    pub anchor_iota_omega: f64,
    pub horizon_days: f64,
    pub market: MarketKnobs,
    pub banks: Vec<BankBalanceSheet>,
    pub initial_capital_ratios: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
enum SeedSource {
    Anchor,
    Config,
    CalibrationFile,
}

#[derive(Debug, Clone, Serialize)]
struct SeedInfo {
    source: SeedSource,
    zombies_units: f64,
    zombies_millions: f64,
    anchor_iota_omega: Option<f64>,
    anchor_deaths_millions: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct Tolerances {
    rel_tol: f64,
    abs_tol: f64,
    store_interval: f64,
    breach_tolerance: f64,
    fire_sale_tol: f64,
}

/// Provenance written next to every result file.
#[derive(Debug, Clone, Serialize)]
struct Metadata<T: Serialize> {
    command: &'static str,
    seed: SeedInfo,
    horizon_days: f64,
    death_measure: DeathMeasure,
    gdp_base: GdpBase,
    repo_liquid: bool,
    breaches_enabled: bool,
    epidemic: EpidemicParams<f64>,
    economy: EconomyParams,
    market: MarketKnobs,
    banks: BankSource,
    tolerances: Tolerances,
    results: T,
}

struct Prepared {
    config: ScenarioConfig,
    seed: SeedInfo,
}

impl Prepared {
    fn metadata<T: Serialize>(&self, command: &'static str, results: T) -> Metadata<T> {
        let p = &self.config.pipeline;
        Metadata {
            command,
            seed: self.seed.clone(),
            horizon_days: p.horizon_days,
            death_measure: p.death_measure,
            gdp_base: p.gdp_base,
            repo_liquid: p.contagion.repo_liquid,
            breaches_enabled: p.contagion.breaches_enabled,
            epidemic: p.epidemic,
            economy: p.economy,
            market: self.config.market.clone(),
            banks: self.config.banks.clone(),
            tolerances: Tolerances {
                rel_tol: p.contagion.ode.rel_tol,
                abs_tol: p.contagion.ode.abs_tol,
                store_interval: p.contagion.ode.store_interval,
                breach_tolerance: p.contagion.breach_tolerance,
                fire_sale_tol: p.fire_sale.tol,
            },
            results,
        }
    }

    fn out_dir(&self, args: &CommonArgs) -> PathBuf {
        args.out
            .clone()
            .or_else(|| self.config.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn jobs(&self, args: &CommonArgs) -> usize {
        args.jobs
            .or(self.config.jobs)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

fn load_config(args: &CommonArgs) -> Result<ScenarioConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::defaults()?,
    };
    if let Some(h) = args.horizon {
        if !(h > 0.0) || !h.is_finite() {
            return Err(ConfigError::Invalid(format!("--horizon must be positive, got {h}")).into());
        }
        config.pipeline.horizon_days = h;
    }
    if args.jobs == Some(0) {
        return Err(ConfigError::Invalid("--jobs must be >= 1".into()).into());
    }
    if args.repo_liquid {
        config.pipeline.contagion.repo_liquid = true;
    }
    Ok(config)
}

fn read_calibration(path: &Path) -> Result<CalibrationFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())).into())
}

fn calibrate_seed(config: &ScenarioConfig) -> Result<SeedCalibration, CliError> {
    config
        .pipeline
        .calibrate_seed(config.anchor_iota_omega, config.anchor_deaths_millions)
        .map_err(|e| CliError::core("calibrate_seed", e))
}

/// Loads the config and settles the seed and bank books.
fn prepare(args: &CommonArgs) -> Result<Prepared, CliError> {
    let mut config = load_config(args)?;
    let to_millions = |units: f64| config.pipeline.epidemic.millions(units);
    let seed = if let Some(path) = &args.calibration {
        let frozen = read_calibration(path)?;
        let market = config.pipeline.financial.market.clone();
        config.pipeline.financial =
            FinancialSystem::new(frozen.banks, market).map_err(|e| CliError::core("calibration banks", e))?;
        SeedInfo {
            source: SeedSource::CalibrationFile,
            zombies_units: frozen.seed.zombies_units,
            zombies_millions: frozen.seed.zombies_millions,
            anchor_iota_omega: Some(frozen.anchor_iota_omega),
            anchor_deaths_millions: Some(frozen.seed.anchor_deaths_millions),
        }
    } else if let Some(millions) = config.seed_millions {
        let units = config.pipeline.epidemic.units_from_millions(millions);
        SeedInfo {
            source: SeedSource::Config,
            zombies_units: units,
            zombies_millions: to_millions(units),
            anchor_iota_omega: None,
            anchor_deaths_millions: None,
        }
    } else {
        let fit = calibrate_seed(&config)?;
        SeedInfo {
            source: SeedSource::Anchor,
            zombies_units: fit.zombies_units,
            zombies_millions: fit.zombies_millions,
            anchor_iota_omega: Some(config.anchor_iota_omega),
            anchor_deaths_millions: Some(config.anchor_deaths_millions),
        }
    };
    config.pipeline.seed_units = seed.zombies_units;
    Ok(Prepared { config, seed })
}

/// Sample times: every whole day plus the horizon itself.
fn daily(horizon: f64) -> Vec<f64> {
    let mut times: Vec<f64> = (0..=horizon.floor() as usize).map(|d| d as f64).collect();
    if horizon.fract() > 0.0 {
        times.push(horizon);
    }
    times
}

fn epidemic_table(run: &PipelineRun, times: &[f64]) -> Result<Table, CliError> {
    let outbreak = run.outbreak();
    let mut table = Table::new(std::iter::once("t_days".to_string()).chain(COMPARTMENTS.iter().map(|c| c.to_string())));
    for &t in times {
        let x = outbreak
            .state_at(t)
            .map_err(|e| CliError::core("epidemic trajectory", e))?;
        let mut row = vec![t];
        row.extend(x.to_array().iter().map(|v| outbreak.params.millions(*v)));
        table.push(row);
    }
    Ok(table)
}

fn contagion_table(run: &PipelineRun, times: &[f64]) -> Result<Table, CliError> {
    let state = &run.contagion.final_state;
    let (na, nb) = (state.q.len(), state.pi.len());
    let header = std::iter::once("t_days".to_string())
        .chain((1..=na).map(|k| format!("q_{k}")))
        .chain((1..=nb).map(|i| format!("Pi_{i}")))
        .chain((1..=nb).map(|i| format!("Psi_{i}")))
        .chain(std::iter::once("eta".to_string()));
    let mut table = Table::new(header);
    for &t in times {
        let s = run
            .contagion
            .state_at(t)
            .map_err(|e| CliError::core("contagion trajectory", e))?;
        let mut row = vec![t];
        row.extend(&s.q);
        row.extend(&s.pi);
        row.extend(&s.psi);
        row.push(s.eta);
        table.push(row);
    }
    Ok(table)
}

#[derive(Debug, Serialize)]
struct SimulateResults {
    iota: f64,
    omega: f64,
    kappa: f64,
    summary: PolicyPoint,
    gdp_loss_dollars: f64,
    final_prices: Vec<f64>,
    fire_sale_prices: Vec<f64>,
    fire_sale_fractions: Vec<f64>,
    final_liquidated_fractions: Vec<f64>,
}

pub fn simulate(args: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let prep = prepare(args)?;
    let config = &prep.config;
    let mut params = config.pipeline.epidemic;
    params.iota = config.iota;
    params.omega = config.omega;
    let run = policy::run_scenario(&params, &config.pipeline).map_err(|e| CliError::core("simulate_contagion", e))?;
    let times = daily(config.pipeline.horizon_days);

    let mut out = Outputs::default();
    out.table("epidemic.csv", &epidemic_table(&run, &times)?)?;
    if !config.pipeline.contagion.repo_liquid {
        out.table("contagion.csv", &contagion_table(&run, &times)?)?;
    }
    let results = SimulateResults {
        iota: params.iota,
        omega: params.omega,
        kappa: params.kappa,
        summary: run.point,
        gdp_loss_dollars: run.gdp.dollars,
        final_prices: run.contagion.final_state.q.clone(),
        fire_sale_prices: run.fire_sale.q_star.clone(),
        fire_sale_fractions: run.fire_sale.fractions.clone(),
        final_liquidated_fractions: run.contagion.final_state.pi.clone(),
    };
    out.json("simulate.json", &prep.metadata("simulate", results))?;
    out.write(&prep.out_dir(args))
}

fn summary_table(points: &[PolicyPoint]) -> Table {
    let mut table = Table::new([
        "iota_omega",
        "deaths_millions",
        "first_order_gdp_pct",
        "regressed_gdp_pct",
        "market_cap_pct",
    ]);
    for p in points {
        table.push(vec![
            p.iota_omega,
            p.deaths_millions,
            p.first_order_gdp_loss_pct,
            p.regressed_gdp_loss_pct,
            p.market_cap_loss_pct,
        ]);
    }
    table
}

fn run_grid(prep: &Prepared, args: &CommonArgs) -> Result<Vec<szr_core::Result<PolicyPoint>>, CliError> {
    if prep.config.grid.is_empty() {
        return Err(ConfigError::Invalid("[policy] grid is empty".into()).into());
    }
    policy::sweep(&prep.config.grid, &prep.config.pipeline, prep.jobs(args)).map_err(|e| CliError::core("sweep", e))
}

#[derive(Debug, Serialize)]
struct SweepFailure {
    iota_omega: f64,
    error: String,
}

#[derive(Debug, Serialize)]
struct SweepResults {
    rows: Vec<PolicyPoint>,
    failures: Vec<SweepFailure>,
    target_deaths_millions: Option<f64>,
    policy_for_target: Option<f64>,
}

pub fn sweep(args: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let prep = prepare(args)?;
    let results = run_grid(&prep, args)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for (x, r) in prep.config.grid.iter().zip(results) {
        match r {
            Ok(p) => rows.push(p),
            Err(e) => {
                failures.push(SweepFailure {
                    iota_omega: *x,
                    error: e.to_string(),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    let target = prep.config.target_deaths_millions;
    let policy_for_target = target
        .map(|t| policy::find_policy_for_deaths(t, prep.config.bracket, &prep.config.pipeline))
        .transpose()
        .map_err(|e| CliError::core("find_policy_for_deaths", e))?;

    let mut table = Table::new([
        "iota_omega",
        "deaths_millions",
        "first_order_gdp_pct",
        "first_order_gdp_grown_pct",
        "regressed_gdp_pct",
        "market_cap_pct",
        "outbreak_market_cap_pct",
    ]);
    for p in &rows {
        table.push(vec![
            p.iota_omega,
            p.deaths_millions,
            p.first_order_gdp_loss_flat_pct,
            p.first_order_gdp_loss_grown_pct,
            p.regressed_gdp_loss_pct,
            p.market_cap_loss_pct,
            p.outbreak_market_cap_loss_pct,
        ]);
    }
    let mut out = Outputs::default();
    out.table("sweep.csv", &table)?;
    let results = SweepResults {
        rows,
        failures,
        target_deaths_millions: target,
        policy_for_target,
    };
    out.json("sweep.json", &prep.metadata("sweep", results))?;
    let written = out.write(&prep.out_dir(args))?;
    match first_error {
        Some(e) => Err(CliError::core("sweep row", e)),
        None => Ok(written),
    }
}

#[derive(Debug, Serialize)]
struct Table2Results {
    rows: Vec<PolicyPoint>,
}

pub fn table2(args: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let prep = prepare(args)?;
    let rows = run_grid(&prep, args)?
        .into_iter()
        .collect::<szr_core::Result<Vec<_>>>()
        .map_err(|e| CliError::core("table2 row", e))?;
    let mut out = Outputs::default();
    out.table("table2.csv", &summary_table(&rows))?;
    out.json("table2.json", &prep.metadata("table2", Table2Results { rows }))?;
    out.write(&prep.out_dir(args))
}

pub fn calibrate(args: &CommonArgs) -> Result<Vec<PathBuf>, CliError> {
    let config = load_config(args)?;
    let seed = calibrate_seed(&config)?;
    let fin = &config.pipeline.financial;
    let na = fin.market.assets();
    let nb = fin.banks.len();
    let initial_capital_ratios = capital_ratios(fin, &vec![1.0; na], &vec![0.0; nb], &vec![0.0; nb])
        .map_err(|e| CliError::core("capital_ratio", e))?;
    let file = CalibrationFile {
        seed,
        anchor_iota_omega: config.anchor_iota_omega,
        horizon_days: config.pipeline.horizon_days,
        market: config.market.clone(),
        banks: fin.banks.clone(),
        initial_capital_ratios,
    };
    let mut out = Outputs::default();
    out.json("calibration.json", &file)?;
    let dir = args
        .out
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    out.write(&dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn daily_grid_includes_horizon() {
        assert_eq!(daily(2.0), vec![0.0, 1.0, 2.0]);
        assert_eq!(daily(1.5), vec![0.0, 1.0, 1.5]);
    }
}
