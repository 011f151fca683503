use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use tcilab::gauss_sim::{CameronMartinShift, DriverSpec, GaussianSampler};
use tcilab::rng::stream_rng;
use tcilab::tci::functionals::{RoughPathLift, WhiteNoiseIdentity};
use tcilab::tci::*;
use tcilab::TimeGrid;

fn weibull(n: usize, shape: f64, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    (0..n).map(|_| (-(1.0 - rng.random::<f64>()).ln()).powf(1.0 / shape)).collect()
}

#[test]
fn tail_fit_recovers_weibull_shapes() {
    for shape in [0.7, 1.0, 2.0] {
        let fit = fit_tail(&weibull(200_000, shape, 3), None).unwrap();
        assert!((fit.theta - shape).abs() < 0.15, "shape {shape}: fitted {}", fit.theta);
        assert!(fit.r_squared > 0.99);
    }
}

#[test]
fn tail_fit_on_gaussian_modulus_is_near_two() {
    let mut rng = stream_rng(8, 0);
    let xs: Vec<f64> = (0..200_000).map(|_| StandardNormal.sample(&mut rng)).map(|x: f64| x.abs()).collect();
    let fit = fit_tail(&xs, None).unwrap();
    assert!((fit.theta - 2.0).abs() < 0.3, "fitted {}", fit.theta);
}

#[test]
fn too_few_samples_are_refused() {
    assert!(fit_tail(&[1.0; 10], None).is_err());
}

#[test]
fn identity_experiment_reproduces_talagrand() {
    let grid = TimeGrid::uniform(1.0, 32).unwrap();
    let driver = DriverSpec::brownian(1);
    let f = WhiteNoiseIdentity { driver, grid: grid.clone() };
    let h = CameronMartinShift::white_noise_fn(grid, 1, |t| vec![1.0 + t]).unwrap();
    let mut cfg = TciConfig::new(h.clone(), vec![0.25, 0.5, 1.0, 2.0, 4.0], 200, 1);
    cfg.theoretical = Some(DeviationFunction::PowerMin { c: 0.5, a: 2.0, b: 2.0 });
    let rep = run_tci_experiment(&f, &cfg).unwrap();
    for row in &rep.rows {
        assert!((row.sync_cost - row.t * h.norm()).abs() < 1e-12);
        assert!((row.entropy - 0.5 * (row.t * h.norm()).powi(2)).abs() < 1e-12);
        assert!(row.satisfied);
    }
    assert!(rep.passed());
}

#[test]
fn violated_deviation_function_is_reported() {
    let grid = TimeGrid::uniform(1.0, 16).unwrap();
    let f = WhiteNoiseIdentity { driver: DriverSpec::brownian(1), grid: grid.clone() };
    let h = CameronMartinShift::white_noise_fn(grid, 1, |_| vec![1.0]).unwrap();
    let mut cfg = TciConfig::new(h, vec![1.0, 2.0], 50, 1);
    cfg.theoretical = Some(DeviationFunction::PowerMin { c: 5.0, a: 2.0, b: 2.0 });
    let rep = run_tci_experiment(&f, &cfg).unwrap();
    assert!(rep.rows.iter().all(|r| !r.satisfied));
    assert!(!rep.passed());
}

#[test]
fn wrong_cost_exponent_is_a_config_error() {
    let grid = TimeGrid::uniform(1.0, 16).unwrap();
    let f = WhiteNoiseIdentity { driver: DriverSpec::brownian(1), grid: grid.clone() };
    let h = CameronMartinShift::white_noise_fn(grid, 1, |_| vec![1.0]).unwrap();
    let mut cfg = TciConfig::new(h, vec![1.0], 10, 1);
    cfg.cost_exponent = Some(0.5);
    assert!(matches!(run_tci_experiment(&f, &cfg), Err(tcilab::Error::Config(_))));
}

#[test]
fn rough_lift_shift_regression_has_unit_small_slope() {
    let grid = TimeGrid::uniform(1.0, 32).unwrap();
    let sampler = GaussianSampler::new(DriverSpec::brownian(2), grid.clone()).unwrap();
    let f = RoughPathLift { sampler, seed: 4, p: 2.5 };
    let h = CameronMartinShift::white_noise_fn(grid, 2, |t| vec![1.0, t]).unwrap();
    let t: Vec<f64> = (-6..=3).map(|k| 2f64.powi(k)).collect();
    let reg = shift_exponent_regression(&f, &h, &t, 64).unwrap();
    assert!(reg.small_ok, "small slope {}", reg.small_slope);
    assert!(reg.large_ok, "large slope {}", reg.large_slope);
}

#[test]
fn exponential_deviations_have_linear_rate() {
    let sampler = |i: u64| -> f64 { Exp1.sample(&mut stream_rng(12, i)) };
    let rep = check_deviation(sampler, &[1, 2, 4], &[1.5, 2.0, 2.5, 3.0, 3.5, 4.0], 20_000, 0.5, 1.2).unwrap();
    assert!(rep.satisfied && rep.fitted_c > 0.0);
    let e = rep.exponents.iter().find(|e| e.n == 1).unwrap();
    assert!((e.exponent - 1.0).abs() < 0.25, "exponent {}", e.exponent);
}

proptest! {
    #[test]
    fn deviation_functions_are_monotone(c in 0.0f64..5.0, a in 0.1f64..4.0, b in 0.1f64..4.0, s in 0.0f64..10.0, ds in 0.0f64..5.0) {
        let f = DeviationFunction::PowerMin { c, a, b };
        prop_assert!(f.eval(s + ds) >= f.eval(s));
        prop_assert!((f.eval(s) - c * f.shape(s)).abs() <= 1e-12 * (1.0 + f.eval(s)));
        let g = DeviationFunction::Talagrand { c, p: a };
        prop_assert!(g.eval(s + ds) >= g.eval(s));
        prop_assert_eq!(f.eval(-1.0), 0.0);
    }
}
