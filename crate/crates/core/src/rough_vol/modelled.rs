use serde::{Deserialize, Serialize};

use crate::error::{domain, shape, Error, Result};
use crate::grid::TimeGrid;

use super::binomial;
use super::distance::{model_distance_with_gamma, TestFunctionFamily};
use super::log_price::VolatilityFunction;
use super::model::ItoModel;
use super::symbols::SymbolSet;

/// `D_f(Π)(t) = Σ_k a_k(t) ΞI(Ξ)^k` with `a_k(t) = ∂ᵏf(Ŵ_t, t)/k!`,
/// `k = 0..=M`, re-expanded by the model's `Γ_{t,s}` (shift `Ŵ_t − Ŵ_s`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelledDistribution {
    grid: TimeGrid,
    gamma: f64,
    symbols: SymbolSet,
    /// `(M+1) × (N+1)`, row `k` holds `a_k` over the grid.
    coeffs: Vec<f64>,
    what: Vec<f64>,
    model_id: u64,
}

impl ModelledDistribution {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn model_id(&self) -> u64 {
        self.model_id
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Coefficient of `ΞI(Ξ)^k` over the grid.
    pub fn coefficient(&self, k: usize) -> &[f64] {
        let n1 = self.grid.len();
        &self.coeffs[k * n1..(k + 1) * n1]
    }

    /// Degree of the `k`-th component.
    pub fn degree(&self, k: usize) -> f64 {
        k as f64 * (self.symbols.hurst - self.symbols.kappa) - 0.5 - self.symbols.kappa
    }

    fn order(&self) -> usize {
        self.symbols.m
    }

    /// Components of `f(t) − Γ_{t,s} f(s)`.
    fn remainder(&self, t: usize, s: usize, out: &mut [f64]) {
        let h = self.what[t] - self.what[s];
        let mm = self.order();
        for (j, o) in out.iter_mut().enumerate().take(mm + 1) {
            let mut expanded = 0.0;
            let mut hp = 1.0;
            for k in j..=mm {
                expanded += self.coefficient(k)[s] * binomial(k, j) * hp;
                hp *= h;
            }
            *o = self.coefficient(j)[t] - expanded;
        }
    }
}

/// Lift `f` to the modelled distribution of order `γ` over `model`.
pub fn lift_modelled_distribution(model: &ItoModel, f: &VolatilityFunction, gamma: f64) -> Result<ModelledDistribution> {
    f.validate()?;
    let symbols = *model.symbols();
    if !(gamma > 0.0 && gamma < symbols.max_gamma()) {
        return domain(format!("order γ = {gamma} outside (0, {})", symbols.max_gamma()));
    }
    let grid = model.grid().clone();
    let what = model.what().to_vec();
    let n1 = grid.len();
    let mut coeffs = vec![0.0; (symbols.m + 1) * n1];
    let mut factorial = 1.0;
    for k in 0..=symbols.m {
        if k > 0 {
            factorial *= k as f64;
        }
        for i in 0..n1 {
            let v = f.derivative(k, what[i], grid.t(i)) / factorial;
            if !v.is_finite() {
                return Err(Error::Evaluation(format!("derivative {k} of f not finite at t = {}", grid.t(i))));
            }
            coeffs[k * n1 + i] = v;
        }
    }
    Ok(ModelledDistribution { grid, gamma, symbols, coeffs, what, model_id: model.id() })
}

fn dgamma_impl(a: &ModelledDistribution, b: Option<&ModelledDistribution>) -> f64 {
    let t = a.grid.points();
    let n1 = t.len();
    let mm = a.order();
    let mut point: f64 = 0.0;
    for k in 0..=mm {
        let ca = a.coefficient(k);
        for i in 0..n1 {
            let d = ca[i] - b.map_or(0.0, |b| b.coefficient(k)[i]);
            point = point.max(d.abs());
        }
    }
    let exps: Vec<f64> = (0..=mm).map(|k| a.gamma - a.degree(k)).collect();
    let mut ra = vec![0.0; mm + 1];
    let mut rb = vec![0.0; mm + 1];
    let mut incr: f64 = 0.0;
    for s in 0..n1 {
        for ti in 0..n1 {
            if ti == s {
                continue;
            }
            a.remainder(ti, s, &mut ra);
            if let Some(b) = b {
                b.remainder(ti, s, &mut rb);
            }
            let gap = (t[ti] - t[s]).abs();
            for j in 0..=mm {
                incr = incr.max((ra[j] - rb[j]).abs() / gap.powf(exps[j]));
            }
        }
    }
    point + incr
}

/// Distance between modelled distributions, each re-expanded by its own
/// model, computed exactly over all grid pairs.
pub fn dgamma_distance(a: &ModelledDistribution, b: &ModelledDistribution) -> Result<f64> {
    if a.grid != b.grid || a.symbols != b.symbols || a.gamma != b.gamma {
        return shape("modelled distributions differ in grid, symbols or order");
    }
    if a.model_id == b.model_id && a.what != b.what {
        return Err(Error::Contract("same model id but different driver values".into()));
    }
    Ok(dgamma_impl(a, Some(b)))
}

pub fn dgamma_norm(a: &ModelledDistribution) -> f64 {
    dgamma_impl(a, None)
}

/// Flat metric on the total space: full model distance plus the distance of
/// the modelled distributions.
pub fn flat_metric(
    a: (&ItoModel, &ModelledDistribution),
    b: (&ItoModel, &ModelledDistribution),
    fam: &TestFunctionFamily,
) -> Result<f64> {
    if a.0.id() != a.1.model_id || b.0.id() != b.1.model_id {
        return Err(Error::Contract("modelled distribution does not belong to the supplied model".into()));
    }
    Ok(model_distance_with_gamma(a.0, b.0, fam)?.total + dgamma_distance(a.1, b.1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough_vol::{Anchors, BrownianNoise};

    fn model(index: u64) -> ItoModel {
        let g = TimeGrid::uniform(1.0, 64).unwrap();
        ItoModel::build(&BrownianNoise::sample(&g, 5, index), 0.25, 0.02, Anchors::Default).unwrap()
    }

    #[test]
    fn coefficients_are_taylor() {
        let m = model(0);
        let d = lift_modelled_distribution(&m, &VolatilityFunction::Polynomial { coeffs: vec![0.0, 0.0, 1.0] }, 0.1).unwrap();
        for i in 0..m.grid().len() {
            let x = m.what()[i];
            assert!((d.coefficient(0)[i] - x * x).abs() < 1e-14);
            assert!((d.coefficient(1)[i] - 2.0 * x).abs() < 1e-14);
            assert!((d.coefficient(2)[i] - 1.0).abs() < 1e-14);
        }
        assert!(lift_modelled_distribution(&m, &VolatilityFunction::identity(), 0.5).is_err());
    }

    #[test]
    fn polynomial_of_degree_m_has_no_remainder() {
        let m = model(1);
        let d = lift_modelled_distribution(&m, &VolatilityFunction::Polynomial { coeffs: vec![0.3, -1.0, 2.0] }, 0.1).unwrap();
        let mut r = vec![0.0; 3];
        for s in 0..m.grid().len() {
            for t in 0..m.grid().len() {
                d.remainder(t, s, &mut r);
                assert!(r.iter().all(|v| v.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn distances() {
        let (m1, m2) = (model(2), model(3));
        let f = VolatilityFunction::Exponential { scale: 0.2, rate: 0.5 };
        let d1 = lift_modelled_distribution(&m1, &f, 0.1).unwrap();
        let d2 = lift_modelled_distribution(&m2, &f, 0.1).unwrap();
        assert_eq!(dgamma_distance(&d1, &d1).unwrap(), 0.0);
        let fam = TestFunctionFamily::dyadic(2, 4);
        assert_eq!(flat_metric((&m1, &d1), (&m1, &d1), &fam).unwrap(), 0.0);
        let x = dgamma_distance(&d1, &d2).unwrap();
        assert!(x > 0.0 && (x - dgamma_distance(&d2, &d1).unwrap()).abs() < 1e-12);
        assert!(flat_metric((&m1, &d1), (&m2, &d1), &fam).is_err());
    }
}
