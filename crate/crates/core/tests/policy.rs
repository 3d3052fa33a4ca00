use szr_core::policy::{find_policy_for_deaths, run_policy, sweep, PipelineConfig, REGRESSION_FACTOR};
use szr_core::Error;

const SEED: f64 = 0.9983679822200228;

fn config() -> PipelineConfig {
    PipelineConfig::with_seed(SEED).unwrap()
}

#[test]
fn calibrated_seed_hits_the_anchor() {
    let c = PipelineConfig::calibrated().unwrap();
    assert!((c.seed_units - SEED).abs() < 1e-6 * SEED);
}

#[test]
fn inverts_deaths_to_policy() {
    let c = config();
    let one = find_policy_for_deaths(1.0, (0.2, 1.0), &c).unwrap();
    assert!((one - 0.322).abs() < 0.002, "{one}");
    let two = find_policy_for_deaths(2.28, (0.2, 1.0), &c).unwrap();
    assert!((two - 0.293).abs() < 0.002, "{two}");
    let err = find_policy_for_deaths(0.0, (0.2, 1.0), &c).unwrap_err();
    assert!(matches!(err, Error::Calibration(_)), "{err}");
}

#[test]
fn sweep_is_order_and_thread_independent() {
    let c = config();
    let grid = [0.45, 0.6, 0.5];
    let serial = sweep(&grid, &c, 1).unwrap();
    let parallel = sweep(&grid, &c, 3).unwrap();
    let reversed = sweep(&[0.5, 0.6, 0.45], &c, 2).unwrap();
    for k in 0..3 {
        let a = serial[k].as_ref().unwrap();
        assert_eq!(a, parallel[k].as_ref().unwrap());
        assert_eq!(a, reversed[2 - k].as_ref().unwrap());
        assert_eq!(a.regressed_gdp_loss_pct, REGRESSION_FACTOR * a.market_cap_loss_pct);
    }
    let single = run_policy(0.6, &c).unwrap();
    assert_eq!(&single, serial[1].as_ref().unwrap());
}

#[test]
fn failing_rows_do_not_stop_the_sweep() {
    let rows = sweep(&[0.5, 0.0], &config(), 2).unwrap();
    assert!(rows[0].is_ok());
    assert!(matches!(rows[1], Err(Error::MarketExhausted { .. })));
}

#[test]
fn tighter_policy_means_smaller_losses() {
    let c = config();
    let rows: Vec<_> = [0.266, 0.3, 0.4, 1.0]
        .iter()
        .map(|x| run_policy(*x, &c).unwrap())
        .collect();
    for w in rows.windows(2) {
        assert!(w[1].deaths_millions < w[0].deaths_millions);
        assert!(w[1].first_order_gdp_loss_pct < w[0].first_order_gdp_loss_pct);
        assert!(w[1].market_cap_loss_pct <= w[0].market_cap_loss_pct);
    }
    let anchor = run_policy(0.5, &c).unwrap();
    assert!(rows[3].deaths_millions < anchor.deaths_millions);
}
