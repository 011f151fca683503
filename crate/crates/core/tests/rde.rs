use tcilab::gauss_sim::{CameronMartinShift, DriverSpec, GaussianSampler};
use tcilab::rde::*;
use tcilab::rough_path::{lift_piecewise_linear, translate};
use tcilab::{Path, TimeGrid};

fn brownian(dim: usize, steps: usize, seed: u64) -> Path {
    let grid = TimeGrid::uniform(1.0, steps).unwrap();
    GaussianSampler::new(DriverSpec::brownian(dim), grid).unwrap().sample(seed, 0)
}

#[test]
fn scalar_linear_equation_converges_to_exponential() {
    let mut prev = f64::INFINITY;
    for steps in [64, 256, 1024] {
        let fine = brownian(1, 4096, 2);
        let stride = 4096 / steps;
        let grid = TimeGrid::uniform(1.0, steps).unwrap();
        let coarse = Path::new(grid, 1, (0..=steps).map(|i| fine.value(i * stride)[0]).collect()).unwrap();
        let vf = VectorFieldSpec::linear(1, vec![vec![0.8]]).unwrap();
        let sol = solve_rde(&lift_piecewise_linear(&coarse), &vf, &[1.0]).unwrap();
        let exact = (0.8 * coarse.value(steps)[0]).exp();
        let err = (sol.terminal()[0] - exact).abs();
        assert!(err < prev, "error {err} did not decrease from {prev}");
        prev = err;
    }
    assert!(prev < 1e-3);
}

#[test]
fn commuting_fields_give_matrix_exponential() {
    let x = brownian(2, 2048, 8);
    let vf = VectorFieldSpec::linear(2, vec![vec![0.5, 0.0, 0.0, -0.3], vec![0.2, 0.0, 0.0, 0.4]]).unwrap();
    let sol = solve_rde(&lift_piecewise_linear(&x), &vf, &[1.0, 2.0]).unwrap();
    let end = x.value(2048);
    let exact = [(0.5 * end[0] + 0.2 * end[1]).exp(), 2.0 * (-0.3 * end[0] + 0.4 * end[1]).exp()];
    for (a, b) in sol.terminal().iter().zip(exact) {
        assert!((a - b).abs() < 5e-3 * b.abs(), "{a} vs {b}");
    }
}

#[test]
fn rotation_fields_nearly_preserve_the_norm() {
    let x = brownian(2, 2048, 4);
    let a1 = vec![0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0];
    let a2 = vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0];
    let vf = VectorFieldSpec::linear(3, vec![a1, a2]).unwrap();
    let sol = solve_rde(&lift_piecewise_linear(&x), &vf, &[1.0, 0.0, 0.0]).unwrap();
    let r: f64 = sol.terminal().iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((r - 1.0).abs() < 1e-2);
}

#[test]
fn shifted_solve_equals_solve_of_translated_lift() {
    let steps = 64;
    let grid = TimeGrid::uniform(1.0, steps).unwrap();
    let x = brownian(2, steps, 1);
    let rp = lift_piecewise_linear(&x);
    let h = CameronMartinShift::white_noise_fn(grid, 2, |t| vec![1.0, -t]).unwrap();
    let vf = VectorFieldSpec::linear(2, vec![vec![0.0, 1.0, -1.0, 0.0], vec![0.3, 0.0, 0.0, 0.3]]).unwrap();
    let a = solve_shifted_rde(&rp, &h, &vf, &[1.0, 0.0]).unwrap();
    let b = solve_rde(&translate(&rp, &h).unwrap(), &vf, &[1.0, 0.0]).unwrap();
    assert_eq!(a.values, b.values);
}

#[test]
fn dimension_mismatch_is_rejected() {
    let x = brownian(2, 8, 1);
    let vf = VectorFieldSpec::linear(1, vec![vec![1.0]]).unwrap();
    assert!(solve_rde(&lift_piecewise_linear(&x), &vf, &[1.0]).is_err());
}

#[test]
fn refined_solve_matches_fine_grid_at_coarse_points() {
    let grid = TimeGrid::uniform(1.0, 8).unwrap();
    let path = Path::from_fn(grid.clone(), 1, |t| vec![(3.0 * t).sin()]).unwrap();
    let vf = VectorFieldSpec::linear(1, vec![vec![0.7]]).unwrap();
    let sol = solve_rde_refined(&path, &vf, &[1.0], 4).unwrap();
    assert_eq!(sol.grid, grid);
    let fine = solve_rde(&lift_piecewise_linear(&path.refined(4).unwrap()), &vf, &[1.0]).unwrap();
    for i in 0..=8 {
        assert_eq!(sol.values[i], fine.values[4 * i]);
    }
    let refined = path.refined(4).unwrap();
    for i in 0..=8 {
        assert_eq!(refined.value(4 * i), path.value(i));
    }
}
