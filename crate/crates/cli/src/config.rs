//! Scenario files: flat INI-style sections of `key = value` pairs.
//!
//! ```text
//! [epidemic]
//! iota = 0.5
//! omega = 0.5
//!
//! [run]
//! repo_liquid = false
//! ```
//!
//! Every key is optional; omitted keys keep the embedded defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use szr_core::contagion::market::{DEFAULT_CAP_EXPONENT, DEFAULT_IMPACT_MULTIPLIER};
use szr_core::contagion::{BankBalanceSheet, CapWeighting, FinancialSystem, MarketParams, SyntheticBanks};
use szr_core::epidemic::DeathMeasure;
use szr_core::policy::{GdpBase, PipelineConfig, ANCHOR_DEATHS_MILLIONS, ANCHOR_IOTA_OMEGA, TABLE2_GRID};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("[{section}] {key}: {message}")]
    Value {
        section: String,
        key: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Raw `section → key → value` contents of a scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ini {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

const KEYS: &[(&str, &[&str])] = &[
    (
        "epidemic",
        &[
            "epsilon",
            "zeta_e",
            "zeta_q",
            "rho_e",
            "rho_q",
            "rho_z",
            "delta",
            "kappa",
            "iota",
            "omega",
            "seed_millions",
            "horizon_days",
        ],
    ),
    (
        "economy",
        &[
            "gdp_total",
            "population",
            "baseline_growth",
            "household_debt_stock",
            "household_debt_service",
            "after_tax_income",
            "business_profit_per_capita",
            "business_debt_stock",
            "dscr",
        ],
    ),
    (
        "market",
        &[
            "impact_multiplier",
            "cap_weighting",
            "cap_exponent",
            "market_caps",
            "theta_min",
        ],
    ),
    (
        "banks",
        &[
            "file",
            "market_share",
            "size_weights",
            "loans_to_securities",
            "cash_to_securities",
            "initial_capital_ratio",
        ],
    ),
    (
        "policy",
        &[
            "grid",
            "anchor_iota_omega",
            "anchor_deaths_millions",
            "target_deaths_millions",
            "bracket",
            "death_measure",
            "gdp_base",
        ],
    ),
    (
        "run",
        &[
            "repo_liquid",
            "breaches_enabled",
            "breach_tolerance",
            "rel_tol",
            "abs_tol",
            "store_interval",
            "jobs",
        ],
    ),
    ("output", &["dir"]),
];

impl Ini {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut ini = Ini::default();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax {
                        line,
                        message: format!("unterminated section header `{content}`"),
                    })?
                    .trim()
                    .to_string();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("unknown section [{name}]"),
                    });
                }
                ini.sections.entry(name.clone()).or_default();
                section = Some(name);
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            let current = section.as_ref().ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("key `{key}` outside any section"),
            })?;
            let allowed = KEYS.iter().find(|(s, _)| s == current).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key.as_str()) {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("unknown key `{key}` in [{current}]"),
                });
            }
            let entries = ini.sections.get_mut(current).expect("section registered");
            if entries.insert(key.clone(), value).is_some() {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("duplicate key `{key}` in [{current}]"),
                });
            }
        }
        Ok(ini)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    fn err(section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            section: section.into(),
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn number(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(section, key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Self::err(section, key, format!("`{v}` is not a finite number")))
            })
            .transpose()
    }

    pub fn numbers(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.get(section, key)
            .map(|v| {
                if v.is_empty() {
                    return Ok(Vec::new());
                }
                v.split(',')
                    .map(|item| {
                        let item = item.trim();
                        item.parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| Self::err(section, key, format!("`{item}` is not a finite number")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn flag(&self, section: &str, key: &str) -> Result<Option<bool>, ConfigError> {
        self.get(section, key)
            .map(|v| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Self::err(section, key, format!("`{v}` is not a boolean"))),
            })
            .transpose()
    }

    pub fn count(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get(section, key)
            .map(|v| {
                v.parse::<usize>()
                    .ok()
                    .filter(|n| *n > 0)
                    .ok_or_else(|| Self::err(section, key, format!("`{v}` is not a positive integer")))
            })
            .transpose()
    }
}

/// Where bank balance sheets come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankSource {
    Synthetic(SyntheticBanks),
    File(PathBuf),
}

/// Market calibration knobs, recorded in every metadata file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketKnobs {
    pub impact_multiplier: f64,
    pub cap_weighting: CapWeighting,
    pub theta_min: f64,
}

/// A fully resolved scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub pipeline: PipelineConfig,
    /// Seed fixed in the file, millions; otherwise calibrated.
    pub seed_millions: Option<f64>,
    pub market: MarketKnobs,
    pub banks: BankSource,
    pub grid: Vec<f64>,
    pub anchor_iota_omega: f64,
    pub anchor_deaths_millions: f64,
    pub target_deaths_millions: Option<f64>,
    pub bracket: (f64, f64),
    /// Policy level for single-scenario runs.
    pub iota: f64,
    pub omega: f64,
    pub jobs: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn defaults() -> Result<Self, ConfigError> {
        Self::from_ini(&Ini::default(), None)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let ini = Ini::parse(&text)?;
        Self::from_ini(&ini, path.parent())
    }

    pub fn from_ini(ini: &Ini, base_dir: Option<&Path>) -> Result<Self, ConfigError> {
        let mut pipeline = PipelineConfig::with_seed(1.0).map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let epi = &mut pipeline.epidemic;
        for (key, slot) in [
            ("epsilon", &mut epi.epsilon),
            ("zeta_e", &mut epi.zeta_e),
            ("zeta_q", &mut epi.zeta_q),
            ("rho_e", &mut epi.rho_e),
            ("rho_q", &mut epi.rho_q),
            ("rho_z", &mut epi.rho_z),
            ("delta", &mut epi.delta),
            ("kappa", &mut epi.kappa),
        ] {
            if let Some(v) = ini.number("epidemic", key)? {
                *slot = v;
            }
        }
        let iota = ini.number("epidemic", "iota")?.unwrap_or(0.0);
        let omega = ini.number("epidemic", "omega")?.unwrap_or(iota);
        let mut check = *epi;
        check.iota = iota;
        check.omega = omega;
        check
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("[epidemic] {e}")))?;
        *epi = check;
        let seed_millions = ini.number("epidemic", "seed_millions")?;
        if let Some(s) = seed_millions {
            if !(s > 0.0) {
                return Err(Ini::err("epidemic", "seed_millions", "must be positive"));
            }
        }
        if let Some(h) = ini.number("epidemic", "horizon_days")? {
            if !(h > 0.0) {
                return Err(Ini::err("epidemic", "horizon_days", "must be positive"));
            }
            pipeline.horizon_days = h;
        }

        let econ = &mut pipeline.economy;
        for (key, slot) in [
            ("gdp_total", &mut econ.gdp_total),
            ("population", &mut econ.population),
            ("baseline_growth", &mut econ.baseline_growth),
            ("household_debt_stock", &mut econ.household_debt_stock),
            ("household_debt_service", &mut econ.household_debt_service),
            ("after_tax_income", &mut econ.after_tax_income),
            ("business_profit_per_capita", &mut econ.business_profit_per_capita),
            ("business_debt_stock", &mut econ.business_debt_stock),
            ("dscr", &mut econ.dscr),
        ] {
            if let Some(v) = ini.number("economy", key)? {
                *slot = v;
            }
        }
        econ.validate()
            .map_err(|e| ConfigError::Invalid(format!("[economy] {e}")))?;

        let market = market_knobs(ini)?;
        let mut market_params = MarketParams::tabulated(&market.cap_weighting, market.impact_multiplier)
            .map_err(|e| ConfigError::Invalid(format!("[market] {e}")))?;
        market_params.theta_min = market.theta_min;
        market_params
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("[market] {e}")))?;

        let banks = bank_source(ini, base_dir)?;
        let books = match &banks {
            BankSource::Synthetic(knobs) => knobs
                .build(&market_params)
                .map_err(|e| ConfigError::Invalid(format!("[banks] {e}")))?,
            BankSource::File(path) => read_bank_file(path)?,
        };
        pipeline.financial =
            FinancialSystem::new(books, market_params).map_err(|e| ConfigError::Invalid(format!("[banks] {e}")))?;

        let grid = ini.numbers("policy", "grid")?.unwrap_or_else(|| TABLE2_GRID.to_vec());
        if grid.iter().any(|x| *x < 0.0) {
            return Err(Ini::err("policy", "grid", "policy levels must be >= 0"));
        }
        let anchor_iota_omega = ini.number("policy", "anchor_iota_omega")?.unwrap_or(ANCHOR_IOTA_OMEGA);
        let anchor_deaths_millions = ini
            .number("policy", "anchor_deaths_millions")?
            .unwrap_or(ANCHOR_DEATHS_MILLIONS);
        if anchor_iota_omega < 0.0 || anchor_deaths_millions < 0.0 {
            return Err(ConfigError::Invalid("[policy] anchor values must be >= 0".into()));
        }
        let target_deaths_millions = ini.number("policy", "target_deaths_millions")?;
        let bracket = match ini.numbers("policy", "bracket")? {
            None => (0.2, 1.0),
            Some(v) if v.len() == 2 && v[0] >= 0.0 && v[1] > v[0] => (v[0], v[1]),
            Some(_) => return Err(Ini::err("policy", "bracket", "expected `lo, hi` with 0 <= lo < hi")),
        };
        if let Some(v) = ini.get("policy", "death_measure") {
            pipeline.death_measure = match v {
                "lost" => DeathMeasure::Lost,
                "removed_only" => DeathMeasure::RemovedOnly,
                _ => return Err(Ini::err("policy", "death_measure", "expected `lost` or `removed_only`")),
            };
        }
        if let Some(v) = ini.get("policy", "gdp_base") {
            pipeline.gdp_base = match v {
                "flat" => GdpBase::Flat,
                "grown" => GdpBase::Grown,
                _ => return Err(Ini::err("policy", "gdp_base", "expected `flat` or `grown`")),
            };
        }

        let run = &mut pipeline.contagion;
        if let Some(v) = ini.flag("run", "repo_liquid")? {
            run.repo_liquid = v;
        }
        if let Some(v) = ini.flag("run", "breaches_enabled")? {
            run.breaches_enabled = v;
        }
        for (key, slot) in [
            ("breach_tolerance", &mut run.breach_tolerance),
            ("rel_tol", &mut run.ode.rel_tol),
            ("abs_tol", &mut run.ode.abs_tol),
            ("store_interval", &mut run.ode.store_interval),
        ] {
            if let Some(v) = ini.number("run", key)? {
                if v < 0.0 {
                    return Err(Ini::err("run", key, "must be >= 0"));
                }
                *slot = v;
            }
        }
        if !(run.ode.rel_tol > 0.0 && run.ode.abs_tol > 0.0) {
            return Err(ConfigError::Invalid("[run] tolerances must be positive".into()));
        }
        let jobs = ini.count("run", "jobs")?;
        let out_dir = ini.get("output", "dir").map(|d| resolve(base_dir, d));

        Ok(Self {
            pipeline,
            seed_millions,
            market,
            banks,
            grid,
            anchor_iota_omega,
            anchor_deaths_millions,
            target_deaths_millions,
            bracket,
            iota,
            omega,
            jobs,
            out_dir,
        })
    }
}

fn resolve(base_dir: Option<&Path>, p: &str) -> PathBuf {
    let path = PathBuf::from(p);
    match base_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path,
    }
}

fn market_knobs(ini: &Ini) -> Result<MarketKnobs, ConfigError> {
    let impact_multiplier = ini
        .number("market", "impact_multiplier")?
        .unwrap_or(DEFAULT_IMPACT_MULTIPLIER);
    if !(impact_multiplier > 0.0) {
        return Err(Ini::err("market", "impact_multiplier", "must be positive"));
    }
    let exponent = ini.number("market", "cap_exponent")?;
    let caps = ini.numbers("market", "market_caps")?;
    let cap_weighting = match (ini.get("market", "cap_weighting"), caps) {
        (Some("explicit") | None, Some(caps)) => CapWeighting::Explicit(caps),
        (Some("explicit"), None) => return Err(Ini::err("market", "market_caps", "required for explicit weighting")),
        (Some("equal"), None) => CapWeighting::Equal,
        (Some("inverse_impact"), None) => CapWeighting::InverseImpact,
        (Some("power") | None, None) => CapWeighting::ImpactPower(exponent.unwrap_or(DEFAULT_CAP_EXPONENT)),
        (Some(other), Some(_)) => {
            return Err(Ini::err(
                "market",
                "market_caps",
                format!("not allowed with `{other}` weighting"),
            ))
        }
        (Some(other), None) => {
            return Err(Ini::err(
                "market",
                "cap_weighting",
                format!("`{other}` is not one of power, equal, inverse_impact, explicit"),
            ))
        }
    };
    let theta_min = ini
        .number("market", "theta_min")?
        .unwrap_or(szr_core::contagion::market::THETA_MIN);
    Ok(MarketKnobs {
        impact_multiplier,
        cap_weighting,
        theta_min,
    })
}

fn bank_source(ini: &Ini, base_dir: Option<&Path>) -> Result<BankSource, ConfigError> {
    if let Some(file) = ini.get("banks", "file") {
        let synthetic_keys = [
            "market_share",
            "size_weights",
            "loans_to_securities",
            "cash_to_securities",
            "initial_capital_ratio",
        ];
        if synthetic_keys.iter().any(|k| ini.get("banks", k).is_some()) {
            return Err(ConfigError::Invalid(
                "[banks] file cannot be combined with synthetic knobs".into(),
            ));
        }
        let path = resolve(base_dir, file);
        if !path.is_file() {
            return Err(Ini::err("banks", "file", format!("{} does not exist", path.display())));
        }
        return Ok(BankSource::File(path));
    }
    let mut knobs = SyntheticBanks::default();
    if let Some(v) = ini.number("banks", "market_share")? {
        knobs.market_share = v;
    }
    if let Some(v) = ini.numbers("banks", "size_weights")? {
        knobs.size_weights = v;
    }
    if let Some(v) = ini.number("banks", "loans_to_securities")? {
        knobs.loans_to_securities = v;
    }
    if let Some(v) = ini.number("banks", "cash_to_securities")? {
        knobs.cash_to_securities = v;
    }
    if let Some(v) = ini.number("banks", "initial_capital_ratio")? {
        knobs.initial_capital_ratio = Some(v);
    }
    Ok(BankSource::Synthetic(knobs))
}

#[derive(Debug, Deserialize)]
struct BankRow {
    name: String,
    cash: f64,
    liabilities: f64,
    loans: f64,
    loan_risk_weight: f64,
}

/// Reads balance sheets from a CSV with columns
/// `name, cash, liabilities, loans, loan_risk_weight, s_1 .. s_n`.
pub fn read_bank_file(path: &Path) -> Result<Vec<BankBalanceSheet>, ConfigError> {
    let bad = |message: String| ConfigError::Invalid(format!("{}: {message}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let fixed = ["name", "cash", "liabilities", "loans", "loan_risk_weight"];
    if headers.len() <= fixed.len() || headers.iter().take(fixed.len()).ne(fixed.iter().copied()) {
        return Err(bad(format!(
            "header must start with {} followed by holdings",
            fixed.join(",")
        )));
    }
    let mut banks = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let head = csv::StringRecord::from(record.iter().take(fixed.len()).collect::<Vec<_>>());
        let row: BankRow = head
            .deserialize(Some(&csv::StringRecord::from(fixed.to_vec())))
            .map_err(|e| bad(e.to_string()))?;
        let holdings = record
            .iter()
            .skip(fixed.len())
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("bank {}: `{v}` is not a number", row.name)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        banks.push(BankBalanceSheet {
            name: row.name,
            holdings,
            cash: row.cash,
            liabilities: row.liabilities,
            loans: row.loans,
            loan_risk_weight: row.loan_risk_weight,
        });
    }
    if banks.is_empty() {
        return Err(bad("no banks listed".into()));
    }
    Ok(banks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let ini = Ini::parse("# top\n[epidemic]\niota = 0.5 ; note\n\n[run]\nrepo_liquid = yes\n").unwrap();
        assert_eq!(ini.number("epidemic", "iota").unwrap(), Some(0.5));
        assert_eq!(ini.flag("run", "repo_liquid").unwrap(), Some(true));
        assert_eq!(ini.get("epidemic", "kappa"), None);
    }

    #[test]
    fn rejects_malformed_input() {
        for text in [
            "iota = 1",
            "[epidemic\n",
            "[nowhere]\n",
            "[epidemic]\nnot a pair\n",
            "[epidemic]\nbogus = 1\n",
            "[epidemic]\niota = 1\niota = 2\n",
        ] {
            assert!(matches!(Ini::parse(text), Err(ConfigError::Syntax { .. })), "{text}");
        }
        let ini = Ini::parse("[epidemic]\niota = fast\n").unwrap();
        assert!(ini.number("epidemic", "iota").is_err());
    }

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ScenarioConfig::from_ini(&Ini::parse("").unwrap(), None).unwrap();
        assert_eq!(cfg.grid, TABLE2_GRID.to_vec());
        assert_eq!(cfg.iota, 0.0);
        assert_eq!(cfg.jobs, None);
        assert_eq!(cfg.market.impact_multiplier, DEFAULT_IMPACT_MULTIPLIER);
        assert!(matches!(cfg.banks, BankSource::Synthetic(_)));
    }

    #[test]
    fn overrides_apply() {
        let text = "[epidemic]\niota = 1\nkappa = 0.693\n[market]\ncap_weighting = equal\n[policy]\ngrid = 0.3, 0.4\ngdp_base = grown\n";
        let cfg = ScenarioConfig::from_ini(&Ini::parse(text).unwrap(), None).unwrap();
        assert_eq!(cfg.iota, 1.0);
        assert_eq!(cfg.omega, 1.0);
        assert_eq!(cfg.pipeline.epidemic.kappa, 0.693);
        assert_eq!(cfg.market.cap_weighting, CapWeighting::Equal);
        assert_eq!(cfg.grid, vec![0.3, 0.4]);
        assert_eq!(cfg.pipeline.gdp_base, GdpBase::Grown);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "[epidemic]\nzeta_q = 5\n",
            "[economy]\ndscr = -1\n",
            "[market]\ncap_weighting = lumpy\n",
            "[policy]\nbracket = 1\n",
            "[run]\njobs = 0\n",
            "[banks]\nfile = /nonexistent/banks.csv\n",
        ] {
            assert!(
                ScenarioConfig::from_ini(&Ini::parse(text).unwrap(), None).is_err(),
                "{text}"
            );
        }
    }

    #[test]
    fn bank_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("banks.csv");
        std::fs::write(
            &path,
            "name,cash,liabilities,loans,loan_risk_weight,s_1,s_2\nA,1,2,3,0.5,4,5\n",
        )
        .unwrap();
        let banks = read_bank_file(&path).unwrap();
        assert_eq!(banks.len(), 1);
        assert_eq!(banks[0].holdings, vec![4.0, 5.0]);
        std::fs::write(&path, "name,cash\nA,1\n").unwrap();
        assert!(read_bank_file(&path).is_err());
    }
}
