use serde::{Deserialize, Serialize};

use crate::error::{domain, shape, Result};
use crate::stats::linear_fit;

use super::binomial;
use super::model::ItoModel;
use super::symbols::Symbol;

/// `sup |φ'|` of `(1−x²)²`, attained at `x = 1/√3`.
const MOTHER_DERIVATIVE_SUP: f64 = 1.539_600_717_839_002;

/// Rescaled bumps `φ^λ_s(t) = λ⁻¹φ((t−s)/λ)` with the mother
/// `φ(x) = (1−x²)²/c` on `(−1,1)`, normalised so `max(‖φ‖_∞, ‖φ'‖_∞) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionFamily {
    pub scales: Vec<f64>,
    /// Positions into the model's anchor list; `None` uses every anchor.
    pub basepoints: Option<Vec<usize>>,
}

impl TestFunctionFamily {
    /// Scales `λ = 2^{−j}` for `j = j0..=j1`.
    pub fn dyadic(j0: i32, j1: i32) -> Self {
        Self { scales: (j0..=j1).map(|j| 2f64.powi(-j)).collect(), basepoints: None }
    }

    pub fn mother(x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            let u = 1.0 - x * x;
            u * u / MOTHER_DERIVATIVE_SUP
        }
    }

    pub fn mother_derivative(x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            -4.0 * x * (1.0 - x * x) / MOTHER_DERIVATIVE_SUP
        }
    }
}

/// All pairings `⟨Π_s τ, φ^λ_s⟩` of one model for a fixed family, in a fixed
/// order, so that distances between many models can reuse them.
#[derive(Debug, Clone)]
pub struct ModelPairings {
    /// `(symbol, anchor position, λ)` per entry.
    pub keys: Vec<(Symbol, usize, f64)>,
    pub values: Vec<f64>,
    /// `λ^{−|τ|}` per entry.
    weights: Vec<f64>,
    grid_id: (usize, u64),
}

impl ModelPairings {
    pub fn new(model: &ItoModel, fam: &TestFunctionFamily) -> Result<Self> {
        let grid = model.grid();
        let horizon = grid.horizon();
        let t = grid.points();
        let n = grid.steps();
        let quad_w: Vec<f64> = (0..=n)
            .map(|i| {
                let l = if i > 0 { t[i] - t[i - 1] } else { 0.0 };
                let r = if i < n { t[i + 1] - t[i] } else { 0.0 };
                0.5 * (l + r)
            })
            .collect();
        let positions: Vec<usize> = match &fam.basepoints {
            Some(b) => b.clone(),
            None => (0..model.anchors().len()).collect(),
        };
        if positions.iter().any(|&p| p >= model.anchors().len()) {
            return shape("basepoint outside the model's anchor list");
        }
        let symbols = model.symbols();
        let what = model.what();
        let w = model.w();
        let mut keys = Vec::new();
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for &lambda in &fam.scales {
            if !(lambda > 0.0) || 2.0 * lambda > horizon {
                return domain(format!("test-function window 2λ = {} does not fit in [0, {horizon}]", 2.0 * lambda));
            }
            for &pos in &positions {
                let a = model.anchors()[pos];
                let s = t[a];
                if s - lambda < 0.0 || s + lambda > horizon {
                    continue;
                }
                let lo = t.partition_point(|&x| x <= s - lambda);
                let hi = t.partition_point(|&x| x < s + lambda);
                let window = lo..hi;
                let phi: Vec<f64> = window.clone().map(|i| TestFunctionFamily::mother((t[i] - s) / lambda) / lambda).collect();
                let dphi: Vec<f64> = window
                    .clone()
                    .map(|i| TestFunctionFamily::mother_derivative((t[i] - s) / lambda) / (lambda * lambda))
                    .collect();
                let weights_here: Vec<f64> = window.clone().map(|i| quad_w[i]).collect();
                let pair_d = |f: &dyn Fn(usize) -> f64| -> f64 {
                    -window.clone().enumerate().map(|(k, i)| f(i) * dphi[k] * weights_here[k]).sum::<f64>()
                };
                let pair = |f: &dyn Fn(usize) -> f64| -> f64 {
                    window.clone().enumerate().map(|(k, i)| f(i) * phi[k] * weights_here[k]).sum::<f64>()
                };
                for sym in symbols.symbols() {
                    let value = match sym {
                        Symbol::Xi => pair_d(&|i| w[i] - w[a]),
                        Symbol::Lift(m) => pair(&|i| (what[i] - what[a]).powi(m as i32)),
                        Symbol::XiLift(m) => {
                            let arr = model.iterated(pos, m);
                            pair_d(&|i| arr[i])
                        }
                        Symbol::One => unreachable!("unit symbol is not paired"),
                    };
                    keys.push((sym, pos, lambda));
                    values.push(value);
                    weights.push(lambda.powf(-symbols.degree(sym)));
                }
            }
        }
        Ok(Self { keys, values, weights, grid_id: (n, horizon.to_bits()) })
    }

    /// `max λ^{−|τ|} |⟨(Π¹_s − Π²_s)τ, φ^λ_s⟩|`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.keys != other.keys || self.grid_id != other.grid_id {
            return shape("pairings were computed for different families or grids");
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(&self.weights)
            .map(|((a, b), w)| (a - b).abs() * w)
            .fold(0.0, f64::max))
    }
}

fn check_compatible(a: &ItoModel, b: &ItoModel) -> Result<()> {
    if a.grid() != b.grid() || a.symbols() != b.symbols() || a.anchors() != b.anchors() {
        return shape("models differ in grid, symbols or anchors");
    }
    Ok(())
}

/// Model distance `sup λ^{−|τ|}|⟨(Π¹_s − Π²_s)τ, φ^λ_s⟩|` over the family.
/// A lower bound for the supremum over all admissible test functions.
pub fn model_distance(a: &ItoModel, b: &ItoModel, fam: &TestFunctionFamily) -> Result<f64> {
    check_compatible(a, b)?;
    ModelPairings::new(a, fam)?.distance(&ModelPairings::new(b, fam)?)
}

/// `sup |(Γ¹_{t,s} − Γ²_{t,s})τ|_β / |t−s|^{|τ|−β}` over anchors `s`, grid
/// times `t ≠ s`, symbols `τ` and components `β < |τ|`.
pub fn gamma_distance(a: &ItoModel, b: &ItoModel) -> Result<f64> {
    check_compatible(a, b)?;
    let t = a.grid().points();
    let step = a.symbols().hurst - a.symbols().kappa;
    let mm = a.symbols().m;
    let mut best: f64 = 0.0;
    for &s in a.anchors() {
        for i in 0..t.len() {
            if i == s {
                continue;
            }
            let ha = a.what()[i] - a.what()[s];
            let hb = b.what()[i] - b.what()[s];
            let gap = (t[i] - t[s]).abs();
            for m in 1..=mm {
                for j in 0..m {
                    let k = (m - j) as i32;
                    let diff = binomial(m, j) * (ha.powi(k) - hb.powi(k)).abs();
                    best = best.max(diff / gap.powf(k as f64 * step));
                }
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreebarReport {
    pub pairing_part: f64,
    pub gamma_part: f64,
    pub total: f64,
    /// `total / pairing_part` (infinite when the pairing part vanishes).
    pub ratio: f64,
}

/// Model distance including the `Γ` term.
pub fn model_distance_with_gamma(a: &ItoModel, b: &ItoModel, fam: &TestFunctionFamily) -> Result<ThreebarReport> {
    let pairing_part = model_distance(a, b, fam)?;
    let gamma_part = gamma_distance(a, b)?;
    let total = pairing_part + gamma_part;
    let ratio = if pairing_part > 0.0 { total / pairing_part } else if total == 0.0 { 1.0 } else { f64::INFINITY };
    Ok(ThreebarReport { pairing_part, gamma_part, total, ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub symbol: Symbol,
    pub degree: f64,
    pub fitted: f64,
}

/// Fitted exponent of the root-mean-square pairing `⟨Π_sτ, φ^λ_s⟩` against
/// `λ`, pooled over models and basepoints, per symbol.
pub fn scaling_exponents(models: &[ItoModel], fam: &TestFunctionFamily) -> Result<Vec<ScalingFit>> {
    let first = models.first().ok_or_else(|| crate::Error::Domain("no models supplied".into()))?;
    let pairings: Vec<ModelPairings> = models.iter().map(|m| ModelPairings::new(m, fam)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for sym in first.symbols().symbols() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &lambda in &fam.scales {
            let mut sum = 0.0;
            let mut count = 0usize;
            for p in &pairings {
                for (k, key) in p.keys.iter().enumerate() {
                    if key.0 == sym && key.2 == lambda {
                        sum += p.values[k] * p.values[k];
                        count += 1;
                    }
                }
            }
            if count > 0 {
                xs.push(lambda.ln());
                ys.push((sum / count as f64).sqrt().ln());
            }
        }
        if xs.len() >= 2 {
            out.push(ScalingFit { symbol: sym, degree: first.symbols().degree(sym), fitted: linear_fit(&xs, &ys).slope });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::rough_vol::{Anchors, BrownianNoise};

    #[test]
    fn mother_is_normalised() {
        let mut sup_d: f64 = 0.0;
        let mut sup: f64 = 0.0;
        for k in 0..=200_000 {
            let x = -1.0 + 2.0 * k as f64 / 200_000.0;
            sup = sup.max(TestFunctionFamily::mother(x).abs());
            sup_d = sup_d.max(TestFunctionFamily::mother_derivative(x).abs());
        }
        assert!(sup_d <= 1.0 && sup_d > 1.0 - 1e-9);
        assert!(sup <= 1.0);
    }

    #[test]
    fn distance_basics() {
        let g = TimeGrid::uniform(1.0, 256).unwrap();
        let fam = TestFunctionFamily::dyadic(2, 4);
        let m1 = ItoModel::build(&BrownianNoise::sample(&g, 9, 0), 0.25, 0.02, Anchors::Default).unwrap();
        let m2 = ItoModel::build(&BrownianNoise::sample(&g, 9, 1), 0.25, 0.02, Anchors::Default).unwrap();
        assert_eq!(model_distance(&m1, &m1, &fam).unwrap(), 0.0);
        let d12 = model_distance(&m1, &m2, &fam).unwrap();
        let d21 = model_distance(&m2, &m1, &fam).unwrap();
        assert!(d12 > 0.0 && (d12 - d21).abs() < 1e-15);
        let bigger = TestFunctionFamily::dyadic(1, 5);
        assert!(model_distance(&m1, &m2, &bigger).unwrap() >= d12);
        assert!(model_distance(&m1, &m2, &TestFunctionFamily::dyadic(0, 0)).is_err());
        let r = model_distance_with_gamma(&m1, &m2, &fam).unwrap();
        assert!(r.ratio >= 1.0);
    }
}
