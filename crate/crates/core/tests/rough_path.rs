use proptest::prelude::*;
use tcilab::gauss_sim::{CameronMartinShift, DriverSpec, GaussianSampler};
use tcilab::rough_path::*;
use tcilab::{Path, TimeGrid};

fn random_path(dim: usize, steps: usize, seed: u64) -> Path {
    let grid = TimeGrid::uniform(1.0, steps).unwrap();
    GaussianSampler::new(DriverSpec::brownian(dim), grid).unwrap().sample(seed, 0)
}

fn path_from(dim: usize, incs: &[f64]) -> Path {
    let steps = incs.len() / dim;
    Path::from_increments(TimeGrid::uniform(1.0, steps).unwrap(), dim, incs).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chen_relation_holds(dim in 1usize..4, steps in 2usize..40, seed in any::<u64>(), cut in 0.0f64..1.0) {
        let rp = lift_piecewise_linear(&random_path(dim, steps, seed));
        let u = 1 + ((steps - 1) as f64 * cut) as usize;
        let joined = chen_combine(&rp.segment(0, u), &rp.segment(u, steps)).unwrap();
        let direct = rp.increment(0, steps);
        prop_assert!(close(&joined.value.x, &direct.x, 1e-10));
        prop_assert!(close(&joined.value.xx, &direct.xx, 1e-10));
    }

    #[test]
    fn symmetric_part_is_half_square(dim in 1usize..4, steps in 1usize..40, seed in any::<u64>()) {
        let rp = lift_piecewise_linear(&random_path(dim, steps, seed));
        let v = rp.increment(0, steps);
        for a in 0..dim {
            for b in 0..dim {
                let sym = 0.5 * (v.xx[a * dim + b] + v.xx[b * dim + a]);
                prop_assert!((sym - 0.5 * v.x[a] * v.x[b]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dynamic_program_matches_enumeration(
        incs in prop::collection::vec(-2.0f64..2.0, 2..20),
        p in 1.0f64..2.99,
    ) {
        let dim = 2;
        let n = incs.len() / dim;
        prop_assume!(n >= 1);
        let rp = lift_piecewise_linear(&path_from(dim, &incs[..n * dim]));
        let fast = p_var_norm(&rp, p).unwrap().value;
        let brute = p_var_exhaustive(&rp, p).unwrap().value;
        prop_assert!((fast - brute).abs() <= 1e-10 * (1.0 + brute));
    }

    #[test]
    fn pvar_dominates_single_interval(dim in 1usize..3, steps in 1usize..30, seed in any::<u64>(), p in 1.0f64..2.99) {
        let rp = lift_piecewise_linear(&random_path(dim, steps, seed));
        let whole = rp.increment(0, steps).size();
        prop_assert!(p_var_norm(&rp, p).unwrap().value >= whole * (1.0 - 1e-12));
    }

    #[test]
    fn translation_composes(steps in 2usize..20, seed in any::<u64>(), a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let grid = TimeGrid::uniform(1.0, steps).unwrap();
        let rp = lift_piecewise_linear(&random_path(2, steps, seed));
        let h1 = CameronMartinShift::white_noise_fn(grid.clone(), 2, |t| vec![a * t, b]).unwrap();
        let h2 = CameronMartinShift::white_noise_fn(grid.clone(), 2, |t| vec![b, a * (1.0 - t)]).unwrap();
        let twice = translate(&translate(&rp, &h1).unwrap(), &h2).unwrap();
        let once = translate(&rp, &h1.add(&h2).unwrap()).unwrap();
        prop_assert!(close(twice.increments(), once.increments(), 1e-12));
        prop_assert!(close(twice.areas(), once.areas(), 1e-12));
    }
}

#[test]
fn lift_of_translated_path_equals_translated_lift() {
    let steps = 16;
    let grid = TimeGrid::uniform(1.0, steps).unwrap();
    let path = random_path(2, steps, 5);
    let h = CameronMartinShift::white_noise_fn(grid, 2, |t| vec![t.sin(), 1.0 - t]).unwrap();
    let shifted = tcilab::gauss_sim::shift_path(&path, &h).unwrap();
    let a = lift_piecewise_linear(&shifted);
    let b = translate(&lift_piecewise_linear(&path), &h).unwrap();
    assert!(close(a.areas(), b.areas(), 1e-12));
    assert!(pvar_distance(&a, &b, 2.5).unwrap() < 1e-10);
}

#[test]
fn pvar_distance_is_symmetric_and_separates() {
    let lifts: Vec<RoughPath> = (0..3).map(|s| lift_piecewise_linear(&random_path(2, 24, s))).collect();
    let d = |i: usize, j: usize| pvar_distance(&lifts[i], &lifts[j], 2.2).unwrap();
    assert_eq!(d(0, 0), 0.0);
    assert!((d(0, 1) - d(1, 0)).abs() < 1e-12);
    assert!(d(0, 2) > 0.0 && d(1, 2) > 0.0);
}

#[test]
fn path_pvar_of_straight_line_is_its_length() {
    let grid = TimeGrid::uniform(1.0, 10).unwrap();
    let line = Path::from_fn(grid, 1, |t| vec![3.0 * t]).unwrap();
    for p in [1.0, 2.0, 4.0] {
        assert!((path_p_var(&line, p).unwrap().value - 3.0).abs() < 1e-12);
    }
}
