use proptest::prelude::*;
use szr_core::epidemic::{simulate, szr_derivative, EpidemicParams, PopulationState, Scenario};
use szr_core::policy::{deaths_at, PipelineConfig};

/// Seed fitted to the anchor row, model units.
const SEED: f64 = 0.9983679822200228;

fn euler(params: &EpidemicParams<f64>, x0: PopulationState<f64>, horizon: f64, h: f64) -> [f64; 6] {
    let steps = (horizon / h).round() as usize;
    let mut x = x0.to_array();
    for _ in 0..steps {
        let d = szr_derivative(&PopulationState::from_slice(&x), params).to_array();
        for j in 0..6 {
            x[j] += h * d[j];
        }
    }
    x
}

#[test]
fn matches_richardson_extrapolated_euler() {
    let params = EpidemicParams::calibrated().with_policy(0.322);
    let scenario = Scenario::seeded(params, SEED, 60.0);
    let got = simulate(&scenario).unwrap().final_state().to_array();
    // Zombie removal runs near 950/day, so explicit Euler needs h well below 2e-3.
    let h = 2e-4;
    let y1 = euler(&params, scenario.initial, 60.0, h);
    let y2 = euler(&params, scenario.initial, 60.0, h / 2.0);
    let y4 = euler(&params, scenario.initial, 60.0, h / 4.0);
    for j in 0..6 {
        let oracle = (8.0 * y4[j] - 6.0 * y2[j] + y1[j]) / 3.0;
        let scale = oracle.abs().max(1e-3 * params.population_total);
        assert!(
            (got[j] - oracle).abs() / scale < 1e-6,
            "compartment {j}: {} vs {oracle}",
            got[j]
        );
    }
}

#[test]
fn deaths_fall_as_policy_tightens() {
    let config = PipelineConfig::with_seed(SEED).unwrap();
    let grid: Vec<f64> = (0..100).map(|k| 0.25 + 0.30 * k as f64 / 99.0).collect();
    let deaths: Vec<f64> = grid.iter().map(|x| deaths_at(*x, &config).unwrap()).collect();
    for w in deaths.windows(2) {
        assert!(w[1] < w[0], "{w:?}");
    }
}

#[test]
fn strong_policy_eradicates_within_a_month() {
    let params = EpidemicParams::calibrated().with_policy(1.0).with_kappa(0.693);
    let out = simulate(&Scenario::seeded(params, SEED, 30.0)).unwrap();
    let x = out.final_state();
    assert!(params.millions(x.e + x.q + x.z) < 1e-6);
}

fn params_strategy() -> impl Strategy<Value = (EpidemicParams<f64>, f64)> {
    (0.0..1.0f64, 0.0..1.0f64, 0.01..0.7f64, 0.0..2e-3f64, 0.01..5.0f64).prop_map(
        |(iota, omega, kappa, rho_e, seed)| {
            let mut p = EpidemicParams::calibrated().with_kappa(kappa);
            p.iota = iota;
            p.omega = omega;
            p.rho_e = rho_e;
            (p, seed)
        },
    )
}

proptest! {
    #[test]
    fn rates_sum_to_zero(
        s in 0.0..330_000.0f64,
        i in 0.0..1e4f64,
        e in 0.0..1e4f64,
        q in 0.0..1e4f64,
        z in 0.0..1e4f64,
        (p, _) in params_strategy(),
    ) {
        let d = szr_derivative(&PopulationState::new(s, i, e, q, z, 0.0), &p);
        let sum: f64 = d.to_array().iter().sum();
        let scale: f64 = d.to_array().iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        prop_assert!(sum.abs() <= 1e-12 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]
    #[test]
    fn population_is_conserved((p, seed) in params_strategy()) {
        let out = simulate(&Scenario::seeded(p, seed, 365.0)).unwrap();
        for (_, y) in out.trajectory.iter() {
            let total: f64 = y.iter().sum();
            prop_assert!((total - p.population_total).abs() / p.population_total <= 1e-9);
            prop_assert!(y.iter().all(|v| *v >= 0.0));
        }
    }
}
