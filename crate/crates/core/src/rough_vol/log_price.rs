use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::path::Path;

use super::model::{BrownianNoise, ItoModel};

/// Volatility function `f(x, t)` of the rough fractional driver value `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VolatilityFunction {
    /// `Σ c_i x^i`.
    Polynomial { coeffs: Vec<f64> },
    /// `scale · exp(rate · x)`.
    Exponential { scale: f64, rate: f64 },
    /// `√ξ₀ · exp(η x / 2 − η² t^{2H} / 4)`, the square root of the rough
    /// Bergomi variance.
    RoughBergomi { xi0: f64, eta: f64, hurst: f64 },
}

impl VolatilityFunction {
    pub fn constant(c: f64) -> Self {
        Self::Polynomial { coeffs: vec![c] }
    }

    pub fn identity() -> Self {
        Self::Polynomial { coeffs: vec![0.0, 1.0] }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Polynomial { coeffs } => coeffs.iter().all(|c| c.is_finite()),
            Self::Exponential { scale, rate } => scale.is_finite() && rate.is_finite(),
            Self::RoughBergomi { xi0, eta, hurst } => *xi0 >= 0.0 && eta.is_finite() && *hurst > 0.0 && *hurst < 1.0,
        };
        if ok {
            Ok(())
        } else {
            domain(format!("invalid volatility function {self:?}"))
        }
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        self.derivative(0, x, t)
    }

    /// `∂ᵏ f / ∂xᵏ` at `(x, t)`.
    pub fn derivative(&self, k: usize, x: f64, t: f64) -> f64 {
        match self {
            Self::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for i in (k..coeffs.len()).rev() {
                    let falling: f64 = ((i - k + 1)..=i).map(|j| j as f64).product();
                    acc = acc * x + coeffs[i] * falling;
                }
                acc
            }
            Self::Exponential { scale, rate } => scale * rate.powi(k as i32) * (rate * x).exp(),
            Self::RoughBergomi { xi0, eta, hurst } => {
                let base = xi0.sqrt() * (0.5 * eta * x - 0.25 * eta * eta * t.powf(2.0 * hurst)).exp();
                (0.5 * eta).powi(k as i32) * base
            }
        }
    }
}

fn checked(v: f64, t: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation(format!("volatility function is not finite at t = {t}")))
    }
}

fn left_point_integral(grid: &TimeGrid, dw: &[f64], what: &[f64], f: &VolatilityFunction) -> Result<Path> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..grid.steps() {
        let t = grid.t(i);
        acc += checked(f.value(what[i], t), t)? * dw[i];
        out.push(acc);
    }
    Path::new(grid.clone(), 1, out)
}

/// Driftless log-price `∫₀ᵗ f(Ŵ^H_r, r) dW_r` as a left-point Itô sum.
pub fn log_price(noise: &BrownianNoise, hurst: f64, f: &VolatilityFunction) -> Result<Path> {
    let what = noise.riemann_liouville(hurst)?;
    left_point_integral(noise.grid(), noise.increments(), &what, f)
}

/// Same sum using the driver stored in a model.
pub fn log_price_from_model(model: &ItoModel, f: &VolatilityFunction) -> Result<Path> {
    let dw: Vec<f64> = model.w().windows(2).map(|p| p[1] - p[0]).collect();
    left_point_integral(model.grid(), &dw, model.what(), f)
}

/// Price `S_t = s₀ exp(X_t − ½∫₀ᵗ f²(Ŵ^H_r, r) dr)`.
pub fn exp_price(s0: f64, noise: &BrownianNoise, hurst: f64, f: &VolatilityFunction) -> Result<Path> {
    let what = noise.riemann_liouville(hurst)?;
    let grid = noise.grid();
    let x = left_point_integral(grid, noise.increments(), &what, f)?;
    let mut out = Vec::with_capacity(grid.len());
    let mut compensator = 0.0;
    out.push(s0);
    for i in 0..grid.steps() {
        let v = f.value(what[i], grid.t(i));
        compensator += 0.5 * v * v * grid.dt(i);
        let s = s0 * (x.values()[i + 1] - compensator).exp();
        out.push(checked(s, grid.t(i + 1))?);
    }
    Path::new(grid.clone(), 1, out)
}

/// Hölder seminorm `max |x_j − x_i| / |t_j − t_i|^α` over all grid pairs,
/// with the maximising pair.
pub fn holder_seminorm(grid: &TimeGrid, values: &[f64], alpha: f64) -> (f64, (usize, usize)) {
    let t = grid.points();
    let mut best = (0.0, (0, 0));
    for i in 0..t.len() {
        for j in (i + 1)..t.len() {
            let v = (values[j] - values[i]).abs() / (t[j] - t[i]).powf(alpha);
            if v > best.0 {
                best = (v, (i, j));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        let f = VolatilityFunction::Polynomial { coeffs: vec![1.0, 2.0, 3.0] };
        assert_eq!(f.derivative(0, 2.0, 0.0), 1.0 + 4.0 + 12.0);
        assert_eq!(f.derivative(1, 2.0, 0.0), 2.0 + 12.0);
        assert_eq!(f.derivative(2, 2.0, 0.0), 6.0);
        assert_eq!(f.derivative(3, 2.0, 0.0), 0.0);
    }

    #[test]
    fn constant_one_gives_the_driver() {
        let g = TimeGrid::uniform(1.0, 64).unwrap();
        let noise = BrownianNoise::sample(&g, 3, 0);
        let x = log_price(&noise, 0.3, &VolatilityFunction::constant(1.0)).unwrap();
        for (a, b) in x.values().iter().zip(noise.path_values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let s = exp_price(1.0, &noise, 0.3, &VolatilityFunction::RoughBergomi { xi0: 0.04, eta: 1.9, hurst: 0.3 }).unwrap();
        assert!(s.values().iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn holder_of_linear_path() {
        let g = TimeGrid::uniform(1.0, 10).unwrap();
        let v: Vec<f64> = g.points().iter().map(|t| 2.0 * t).collect();
        assert!((holder_seminorm(&g, &v, 1.0).0 - 2.0).abs() < 1e-12);
    }
}
