use proptest::prelude::*;
use tcilab::gauss_sim::CameronMartinShift;
use tcilab::rough_vol::*;
use tcilab::TimeGrid;

fn model(steps: usize, hurst: f64, kappa: f64, index: u64) -> ItoModel {
    let grid = TimeGrid::uniform(1.0, steps).unwrap();
    ItoModel::build(&BrownianNoise::sample(&grid, 21, index), hurst, kappa, Anchors::Count(5)).unwrap()
}

#[test]
fn truncation_level_for_the_rough_regime() {
    assert_eq!(choose_m(0.25, 0.02).unwrap(), 2);
    assert_eq!(choose_m(0.1, 0.01).unwrap(), 5);
    assert!(choose_m(0.3, 0.3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn choose_m_matches_scan(hurst in 0.05f64..0.95, frac in 0.01f64..0.9) {
        let kappa = hurst * frac;
        let m = choose_m(hurst, kappa).unwrap();
        let excess = |m: usize| m as f64 * (hurst - kappa) - 0.5 - kappa;
        let scan = (0..1000).take_while(|&k| excess(k) <= 1e-12).last().unwrap();
        prop_assert_eq!(m, scan);
    }

    #[test]
    fn model_distance_is_symmetric_and_vanishes_on_the_diagonal(i in 0u64..50, j in 0u64..50) {
        let fam = TestFunctionFamily::dyadic(1, 4);
        let (a, b) = (model(64, 0.3, 0.05, i), model(64, 0.3, 0.05, j));
        prop_assert_eq!(model_distance(&a, &a, &fam).unwrap(), 0.0);
        let ab = model_distance(&a, &b, &fam).unwrap();
        let ba = model_distance(&b, &a, &fam).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
    }
}

#[test]
fn iterated_integrals_match_direct_sums() {
    let m = model(128, 0.25, 0.02, 3);
    let dw = m.noise().increments().to_vec();
    let what = m.what().to_vec();
    for (pos, &a) in m.anchors().iter().enumerate() {
        for order in 1..=m.symbols().m {
            let stored = m.iterated(pos, order);
            let mut acc = 0.0;
            for t in a + 1..=128 {
                acc += (what[t - 1] - what[a]).powi(order as i32) * dw[t - 1];
                assert!((stored[t] - acc).abs() < 1e-12 * (1.0 + acc.abs()));
            }
        }
    }
}

#[test]
fn translation_routes_agree() {
    let m = model(128, 0.25, 0.02, 5);
    let h = CameronMartinShift::white_noise_fn(m.grid().clone(), 1, |t| vec![2.0 * t - 0.5]).unwrap();
    let direct = m.translate(&h).unwrap();
    let expanded = m.translate_expanded(&h).unwrap();
    assert!(direct.max_abs_difference(&expanded) < 1e-9);
}

#[test]
fn constant_volatility_log_price_is_scaled_brownian_motion() {
    let grid = TimeGrid::uniform(1.0, 64).unwrap();
    let noise = BrownianNoise::sample(&grid, 4, 0);
    let x = log_price(&noise, 0.3, &VolatilityFunction::constant(0.4)).unwrap();
    for (a, b) in x.values().iter().zip(noise.path_values()) {
        assert!((a - 0.4 * b).abs() < 1e-12);
    }
}

#[test]
fn modelled_distribution_distance_vanishes_on_itself() {
    let m = model(128, 0.3, 0.05, 9);
    let f = VolatilityFunction::Polynomial { coeffs: vec![0.2, 0.5, 0.1] };
    assert!(lift_modelled_distribution(&m, &f, m.symbols().max_gamma() + 0.05).is_err());
    let u = lift_modelled_distribution(&m, &f, 0.15).unwrap();
    assert_eq!(dgamma_distance(&u, &u).unwrap(), 0.0);
    let fam = TestFunctionFamily::dyadic(1, 4);
    assert_eq!(flat_metric((&m, &u), (&m, &u), &fam).unwrap(), 0.0);
}
