use proptest::prelude::*;
use tcilab::gauss_sim::*;
use tcilab::linalg::Cholesky;
use tcilab::TimeGrid;

fn empirical_second_moments(spec: DriverSpec, steps: usize, n: usize, seed: u64) -> (TimeGrid, Vec<Vec<f64>>) {
    let grid = TimeGrid::uniform(1.0, steps).unwrap();
    let paths = sample_paths(spec, grid.clone(), n, seed).unwrap();
    let cols = (0..=steps).map(|i| paths.iter().map(|p| p.value(i)[0]).collect()).collect();
    (grid, cols)
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn riemann_liouville_variance_is_power_law() {
    for hurst in [0.1, 0.3, 0.5] {
        let spec = DriverSpec::new(DriverKind::RiemannLiouville { hurst }, 1).unwrap();
        let (grid, cols) = empirical_second_moments(spec, 16, 20_000, 11);
        for i in [2, 5, 9, 13, 16] {
            let sq: Vec<f64> = cols[i].iter().map(|x| x * x).collect();
            let (m, se) = mean_and_se(&sq);
            let exact = grid.t(i).powf(2.0 * hurst);
            assert!((m - exact).abs() < 4.0 * se, "H={hurst} t={} mean {m} exact {exact}", grid.t(i));
        }
    }
}

#[test]
fn fbm_cross_covariance_matches_formula() {
    let spec = DriverSpec::new(DriverKind::FractionalBm { hurst: 0.3 }, 1).unwrap();
    let (grid, cols) = empirical_second_moments(spec, 8, 20_000, 3);
    for (i, j) in [(2, 5), (4, 8), (7, 8)] {
        let prod: Vec<f64> = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).collect();
        let (m, se) = mean_and_se(&prod);
        let exact = spec.covariance(grid.t(i), grid.t(j), 1.0);
        assert!((m - exact).abs() < 4.0 * se);
    }
}

#[test]
fn bridge_is_pinned() {
    let grid = TimeGrid::uniform(2.0, 10).unwrap();
    let s = GaussianSampler::new(DriverSpec::new(DriverKind::BrownianBridge, 2).unwrap(), grid).unwrap();
    let p = s.sample(1, 4);
    assert_eq!(p.value(0), &[0.0, 0.0]);
    assert!(p.value(10).iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn sampling_is_deterministic_per_index() {
    let grid = TimeGrid::uniform(1.0, 32).unwrap();
    let s = GaussianSampler::new(DriverSpec::new(DriverKind::FractionalBm { hurst: 0.4 }, 2).unwrap(), grid).unwrap();
    assert_eq!(s.sample(9, 3), s.sample(9, 3));
    assert_ne!(s.sample(9, 3), s.sample(9, 4));
    assert_ne!(s.sample(9, 3), s.sample(10, 3));
    let batch = s.sample_paths(5, 9);
    assert_eq!(batch[3], s.sample(9, 3));
}

#[test]
fn brownian_shift_norm_is_l2_norm_of_density() {
    let grid = TimeGrid::uniform(4.0, 64).unwrap();
    let h = CameronMartinShift::white_noise_fn(grid, 1, |_| vec![1.5]).unwrap();
    assert!((cm_norm(&h) - 1.5 * 2.0).abs() < 1e-12);
    assert!((h.scaled(2.0).norm() - 6.0).abs() < 1e-12);
}

#[test]
fn volterra_kernel_integral_matches_quadrature() {
    for hurst in [0.1, 0.3, 0.7] {
        let exact = volterra_kernel_integral(hurst, 0.2, 0.9);
        let quad = tcilab::quad::integrate(|t| volterra_kernel(hurst, t).unwrap(), 0.2, 0.9, 1e-12);
        assert!((exact - quad).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn covariance_is_symmetric_positive_definite(hurst in 0.05f64..0.95, steps in 2usize..40) {
        let grid = TimeGrid::uniform(1.0, steps).unwrap();
        for kind in [DriverKind::FractionalBm { hurst }, DriverKind::RiemannLiouville { hurst }] {
            let spec = DriverSpec::new(kind, 1).unwrap();
            let cov = covariance_matrix(&spec, &grid, 1..steps + 1);
            for i in 0..steps {
                for j in 0..steps {
                    prop_assert_eq!(cov[i * steps + j], cov[j * steps + i]);
                }
            }
            prop_assert!(Cholesky::factor(&cov, steps).is_ok());
        }
    }

    #[test]
    fn shifted_path_moves_by_path_shift(seed in any::<u64>(), c in -3.0f64..3.0) {
        let grid = TimeGrid::uniform(1.0, 12).unwrap();
        let s = GaussianSampler::new(DriverSpec::brownian(1), grid.clone()).unwrap();
        let p = s.sample(seed, 0);
        let h = CameronMartinShift::white_noise_fn(grid.clone(), 1, |_| vec![c]).unwrap();
        let q = shift_path(&p, &h).unwrap();
        for i in 0..=12 {
            prop_assert!((q.value(i)[0] - p.value(i)[0] - c * grid.t(i)).abs() < 1e-12);
        }
    }
}
