use proptest::prelude::*;
use rand::Rng;
use tcilab::rng::stream_rng;
use tcilab::transport::*;

/// All permutations of `0..n` (Heap's algorithm).
fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            if k % 2 == 0 { a.swap(i, k - 1) } else { a.swap(0, k - 1) }
        }
    }
    let mut out = Vec::new();
    heap(n, &mut (0..n).collect(), &mut out);
    out
}

fn brute_force(c: &CostMatrix) -> f64 {
    let n = c.rows();
    permutations(n)
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum::<f64>() / n as f64)
        .fold(f64::INFINITY, f64::min)
}

fn cloud(n: usize, dim: usize, seed: u64, stream: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, stream);
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn euclid(a: &Vec<f64>, b: &Vec<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn permutation_count() {
    assert_eq!(permutations(4).len(), 24);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn exact_matches_brute_force(n in 1usize..7, dim in 1usize..4, seed in any::<u64>(), squared in any::<bool>()) {
        let xs = cloud(n, dim, seed, 0);
        let ys = cloud(n, dim, seed, 1);
        let cost = |a: &Vec<f64>, b: &Vec<f64>| if squared { euclid(a, b).powi(2) } else { euclid(a, b) };
        let mu = EmpiricalMeasure::uniform(xs.clone()).unwrap();
        let nu = EmpiricalMeasure::uniform(ys.clone()).unwrap();
        let plan = wc_exact(&mu, &nu, cost).unwrap();
        let brute = brute_force(&CostMatrix::from_oracle(&xs, &ys, cost).unwrap());
        prop_assert!((plan.cost - brute).abs() <= 1e-9);
    }

    #[test]
    fn lp_satisfies_strong_duality(n in 1usize..8, m in 1usize..8, seed in any::<u64>()) {
        let xs = cloud(n, 2, seed, 2);
        let ys = cloud(m, 2, seed, 3);
        let mut rng = stream_rng(seed, 4);
        let mut a: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let mut b: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
        a.iter_mut().for_each(|v| *v /= sa);
        b.iter_mut().for_each(|v| *v /= sb);
        let c = CostMatrix::from_oracle(&xs, &ys, euclid).unwrap();
        let plan = exact_lp(&a, &b, &c).unwrap();
        prop_assert!(plan.marginal_error < 1e-9);
        let (f, g) = plan.duals.clone().unwrap();
        for i in 0..n {
            for j in 0..m {
                prop_assert!(f[i] + g[j] <= c.get(i, j) + 1e-9);
            }
        }
        prop_assert!((plan.dual_value(&a, &b).unwrap() - plan.cost).abs() < 1e-9);
    }

    #[test]
    fn synchronous_coupling_upper_bounds_optimum(n in 1usize..7, seed in any::<u64>()) {
        let xs = cloud(n, 2, seed, 5);
        let ys = cloud(n, 2, seed, 6);
        let sync = synchronous_cost(&xs, &ys, euclid).unwrap();
        let plan = wc_exact(&EmpiricalMeasure::uniform(xs).unwrap(), &EmpiricalMeasure::uniform(ys).unwrap(), euclid).unwrap();
        prop_assert!(plan.cost <= sync + 1e-12);
    }
}

#[test]
fn sinkhorn_is_close_to_exact_on_gaussian_clouds() {
    let n = 32;
    let mut rng = stream_rng(17, 0);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..1.5)).collect();
    let c = CostMatrix::from_oracle(&xs, &ys, |a, b| (a - b).powi(2)).unwrap();
    let w = vec![1.0 / n as f64; n];
    let exact = hungarian(&c).unwrap().cost;
    let sk = wc_sinkhorn(&w, &w, &c, 1e-2 * c.median()).unwrap();
    assert!(sk.cost >= exact - 1e-12);
    assert!((sk.cost - exact) / exact < 0.05, "sinkhorn {} exact {}", sk.cost, exact);
}

#[test]
fn cost_oracle_checks_diagonal_and_symmetry() {
    let xs = [0.0, 1.0];
    assert!(check_cost_oracle(&xs, |a: &f64, b: &f64| (a - b).abs() + 1.0, false).is_err());
    assert!(check_cost_oracle(&xs, |a: &f64, b: &f64| (a - b).max(0.0), true).is_err());
    assert!(check_cost_oracle(&xs, |a: &f64, b: &f64| (a - b).abs(), true).is_ok());
}
