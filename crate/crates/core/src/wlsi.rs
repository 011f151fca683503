//! Weighted log-Sobolev checks for finite-dimensional Brownian functionals.
//!
//! The underlying Wiener space is discretised into standard normal cell
//! coordinates `z`, with Brownian increments `ΔW_l = √Δt_l · z_l`. In these
//! coordinates the Cameron–Martin gradient is the ordinary gradient in `z`,
//! so `‖DΨ‖²_ℋ = Σ_l (∂Ψ/∂z_l)²`, summed over output coordinates
//! (Hilbert–Schmidt norm).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::TimeGrid;
use crate::path::Path;
use crate::rng::{derive_seed, normals, stream_rng};
use crate::rough_path::{lift_piecewise_linear, p_var_norm};
use crate::stats::{linear_fit, mean, pairwise_sum};

/// Finite-difference step for gradient validation.
pub const FD_STEP: f64 = 1e-4;
/// Relative tolerance of the finite-difference validation.
pub const FD_TOLERANCE: f64 = 1e-3;
/// Random directions per validated sample.
pub const FD_DIRECTIONS: usize = 10;
/// Samples drawn for gradient validation at batch start.
pub const FD_SAMPLES: usize = 20;
/// Minimal effective sample size of `G^p` in the moment check.
pub const MIN_MOMENT_ESS: f64 = 100.0;
/// Below this second moment a test function is dropped.
pub const MIN_SECOND_MOMENT: f64 = 1e-12;

const LOG_GUARD: f64 = 1e-300;
const SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalKind {
    /// `(X(h_1)^{p_1}, …, X(h_m)^{p_m})` with `X(h) = Σ h(cell) ΔW`;
    /// `integrands[k]` holds one value per cell.
    PolynomialWienerIntegrals { integrands: Vec<Vec<f64>>, powers: Vec<u32> },
    /// `(‖X‖_{C^α}, X_{s,t}, 𝕏_{s,t})` for a `dim`-dimensional Brownian
    /// motion; `s` and `t` are grid indices.
    RoughPathTriple { alpha: f64, dim: usize, s: usize, t: usize },
    /// `(‖𝐗‖_{p-var}, Y_T)` for the scalar linear equation `dY = rate·Y dX`
    /// driven by a one-dimensional Brownian motion.
    RdeEndpoint { rate: f64, y0: f64, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub kind: FunctionalKind,
    pub grid: TimeGrid,
}

/// Weight functions `G: ℝ^m → [0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Weight {
    Unit,
    /// `(1 + |x|_{ℓ¹})²`
    L1Square,
    /// `(1 + x_1)²`
    FirstCoordinateSquare,
    /// `x_1 + exp(x_1^p)`
    ExpPower { p: f64 },
}

impl Weight {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Weight::Unit => 1.0,
            Weight::L1Square => (1.0 + x.iter().map(|v| v.abs()).sum::<f64>()).powi(2),
            Weight::FirstCoordinateSquare => (1.0 + x[0]).powi(2),
            Weight::ExpPower { p } => x[0] + x[0].abs().powf(p).exp(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Weight::Unit => "1".into(),
            Weight::L1Square => "(1+|x|_1)^2".into(),
            Weight::FirstCoordinateSquare => "(1+x_1)^2".into(),
            Weight::ExpPower { p } => format!("x_1+exp(x_1^{p})"),
        }
    }
}

/// A weight together with the constant `c` of `‖DΨ‖² ≤ c·G(Ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub weight: Weight,
    pub c: f64,
}

impl WeightSpec {
    pub fn new(weight: Weight, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return domain("weight constant must be positive and finite");
        }
        Ok(Self { weight, c })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.weight.eval(x)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl FunctionalSpec {
    pub fn new(kind: FunctionalKind, grid: TimeGrid) -> Result<Self> {
        let n = grid.steps();
        match &kind {
            FunctionalKind::PolynomialWienerIntegrals { integrands, powers } => {
                if integrands.is_empty() || integrands.len() != powers.len() {
                    return domain("need one power per integrand and at least one integrand");
                }
                if integrands.iter().any(|h| h.len() != n) {
                    return domain("integrands must hold one value per grid cell");
                }
                if powers.iter().any(|&p| p == 0) {
                    return domain("powers must be at least 1");
                }
                if integrands.iter().flatten().any(|v| !v.is_finite()) {
                    return domain("integrands must be finite");
                }
            }
            FunctionalKind::RoughPathTriple { alpha, dim, s, t } => {
                if !(*alpha > 0.0 && *alpha < 0.5) {
                    return domain("Hölder exponent must lie in (0, 1/2)");
                }
                if *dim == 0 || s >= t || *t > n {
                    return domain("need dim ≥ 1 and grid indices s < t ≤ N");
                }
            }
            FunctionalKind::RdeEndpoint { rate, y0, p } => {
                if !(2.0..3.0).contains(p) || *p == 2.0 {
                    return domain("p must lie in (2, 3) for a Brownian lift");
                }
                if !rate.is_finite() || !y0.is_finite() {
                    return domain("rate and initial value must be finite");
                }
            }
        }
        Ok(Self { kind, grid })
    }

    /// Polynomial functional with cosine integrands `h_k(t) = √(2/T) cos(kπt/T)`
    /// (`h_0 = 1/√T`), each of unit `L²` norm on the grid midpoints.
    pub fn cosine_polynomial(grid: TimeGrid, powers: Vec<u32>) -> Result<Self> {
        let horizon = grid.horizon();
        let integrands = (0..powers.len())
            .map(|k| {
                let raw: Vec<f64> = (0..grid.steps())
                    .map(|l| {
                        let mid = 0.5 * (grid.t(l) + grid.t(l + 1));
                        if k == 0 { 1.0 } else { (k as f64 * std::f64::consts::PI * mid / horizon).cos() }
                    })
                    .collect();
                let nrm = raw.iter().enumerate().map(|(l, v)| v * v * grid.dt(l)).sum::<f64>().sqrt();
                raw.into_iter().map(|v| v / nrm).collect()
            })
            .collect();
        Self::new(FunctionalKind::PolynomialWienerIntegrals { integrands, powers }, grid)
    }

    /// Number of standard normal coordinates.
    pub fn noise_dim(&self) -> usize {
        match &self.kind {
            FunctionalKind::RoughPathTriple { dim, .. } => self.grid.steps() * dim,
            _ => self.grid.steps(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.kind {
            FunctionalKind::PolynomialWienerIntegrals { powers, .. } => powers.len(),
            FunctionalKind::RoughPathTriple { dim, .. } => 1 + dim + dim * dim,
            FunctionalKind::RdeEndpoint { .. } => 2,
        }
    }

    /// The weight and constant under which the gradient bound is proved.
    ///
    /// Polynomial: `‖DΨ‖² ≤ (max p_k‖h_k‖)² Σ|X_k|^{2(p_k−1)} ≤ (m·max p_k‖h_k‖)²(1+|Ψ|₁)²`.
    /// Triple: `‖DΨ₁‖² ≤ T^{1−2α}`, `‖DΨ₂‖² = d(t−s)`,
    /// `‖DΨ₃‖² ≤ 2(d+1)(t−s)^{1+2α}Ψ₁²`.
    /// RDE: `‖DΨ₁‖² ≤ T(1+Ψ₁)² ≤ 4T·G` and `e^{2a X_T} ≤ e^{a²+1}e^{Ψ₁^p}`.
    pub fn stated_weight(&self) -> WeightSpec {
        let horizon = self.grid.horizon();
        match &self.kind {
            FunctionalKind::PolynomialWienerIntegrals { integrands, powers } => {
                let m = powers.len() as f64;
                let lead = integrands
                    .iter()
                    .zip(powers)
                    .map(|(h, &p)| p as f64 * self.integrand_norm(h))
                    .fold(0.0, f64::max);
                WeightSpec { weight: Weight::L1Square, c: (m * lead).powi(2) }
            }
            FunctionalKind::RoughPathTriple { alpha, dim, s, t } => {
                let d = *dim as f64;
                let span = self.grid.t(*t) - self.grid.t(*s);
                let base = horizon.powf(1.0 - 2.0 * alpha) + d * span;
                let area = 2.0 * (d + 1.0) * span.powf(1.0 + 2.0 * alpha);
                WeightSpec { weight: Weight::FirstCoordinateSquare, c: base.max(area) }
            }
            FunctionalKind::RdeEndpoint { rate, y0, p } => {
                let a2 = rate * rate;
                let c = 4.0 * horizon + a2 * horizon * y0 * y0 * (a2 + 1.0).exp();
                WeightSpec { weight: Weight::ExpPower { p: *p }, c }
            }
        }
    }

    fn integrand_norm(&self, h: &[f64]) -> f64 {
        h.iter().enumerate().map(|(l, v)| v * v * self.grid.dt(l)).sum::<f64>().sqrt()
    }

    fn check_noise(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.noise_dim() {
            return Err(Error::Shape(format!("expected {} noise coordinates, got {}", self.noise_dim(), z.len())));
        }
        Ok(())
    }

    fn increments(&self, z: &[f64], dim: usize) -> Vec<f64> {
        z.chunks(dim).enumerate().flat_map(|(l, c)| c.iter().map(move |v| v * self.grid.dt(l).sqrt())).collect()
    }

    /// `Ψ(z)`.
    pub fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_noise(z)?;
        Ok(match &self.kind {
            FunctionalKind::PolynomialWienerIntegrals { integrands, powers } => {
                let dw = self.increments(z, 1);
                integrands
                    .iter()
                    .zip(powers)
                    .map(|(h, &p)| h.iter().zip(&dw).map(|(a, b)| a * b).sum::<f64>().powi(p as i32))
                    .collect()
            }
            FunctionalKind::RoughPathTriple { alpha, dim, s, t } => {
                let x = self.path_values(z, *dim);
                let (holder, _) = holder_argmax(&self.grid, &x, *dim, *alpha);
                let mut out = vec![holder];
                out.extend((0..*dim).map(|a| x[t * dim + a] - x[s * dim + a]));
                out.extend(area(&x, *dim, *s, *t));
                out
            }
            FunctionalKind::RdeEndpoint { rate, y0, p } => {
                let x = self.path_values(z, 1);
                let pv = self.rough_pvar(&x, *p)?;
                vec![pv.value, y0 * (rate * x[self.grid.steps()]).exp()]
            }
        })
    }

    fn path_values(&self, z: &[f64], dim: usize) -> Vec<f64> {
        let dw = self.increments(z, dim);
        let mut x = vec![0.0; dim];
        for l in 0..self.grid.steps() {
            for a in 0..dim {
                let v = x[l * dim + a] + dw[l * dim + a];
                x.push(v);
            }
        }
        x
    }

    fn rough_pvar(&self, x: &[f64], p: f64) -> Result<crate::rough_path::PVarResult> {
        let path = Path::new(self.grid.clone(), 1, x.to_vec())?;
        p_var_norm(&lift_piecewise_linear(&path), p)
    }

    /// Analytic ℋ-gradient, `m × noise_dim` row-major, with respect to `z`.
    pub fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_noise(z)?;
        let nz = self.noise_dim();
        let m = self.output_dim();
        let mut g = vec![0.0; m * nz];
        let sq: Vec<f64> = (0..self.grid.steps()).map(|l| self.grid.dt(l).sqrt()).collect();
        match &self.kind {
            FunctionalKind::PolynomialWienerIntegrals { integrands, powers } => {
                let dw = self.increments(z, 1);
                for (k, (h, &p)) in integrands.iter().zip(powers).enumerate() {
                    let xk: f64 = h.iter().zip(&dw).map(|(a, b)| a * b).sum();
                    let lead = p as f64 * xk.powi(p as i32 - 1);
                    for l in 0..nz {
                        g[k * nz + l] = lead * h[l] * sq[l];
                    }
                }
            }
            FunctionalKind::RoughPathTriple { alpha, dim, s, t } => {
                let d = *dim;
                let x = self.path_values(z, d);
                let (holder, pair) = holder_argmax(&self.grid, &x, d, *alpha);
                if let Some((i, j)) = pair.filter(|_| holder > 0.0) {
                    let scale = (self.grid.t(j) - self.grid.t(i)).powf(*alpha);
                    for l in i..j {
                        for a in 0..d {
                            let dir = (x[j * d + a] - x[i * d + a]) / (holder * scale * scale);
                            g[l * d + a] = dir * sq[l];
                        }
                    }
                }
                for a in 0..d {
                    for l in *s..*t {
                        g[(1 + a) * nz + l * d + a] = sq[l];
                    }
                }
                for l in *s..*t {
                    for a in 0..d {
                        for b in 0..d {
                            let row = (1 + d + a * d + b) * nz;
                            let mid = |c: usize| 0.5 * (x[l * d + c] + x[(l + 1) * d + c]);
                            // ∂𝕏^{ab}/∂ΔX^c_l = δ_{ac}(X^b_t − M^b_l) + δ_{bc}(M^a_l − X^a_s)
                            g[row + l * d + a] += (x[t * d + b] - mid(b)) * sq[l];
                            g[row + l * d + b] += (mid(a) - x[s * d + a]) * sq[l];
                        }
                    }
                }
            }
            FunctionalKind::RdeEndpoint { rate, y0, p } => {
                let x = self.path_values(z, 1);
                let pv = self.rough_pvar(&x, *p)?;
                if pv.value > 0.0 {
                    for w in pv.partition.windows(2) {
                        let inc = x[w[1]] - x[w[0]];
                        let omega = inc.abs() + 0.5 * inc * inc;
                        let slope = pv.value.powf(1.0 - p) * omega.powf(p - 1.0) * (inc.signum() + inc);
                        for l in w[0]..w[1] {
                            g[l] = slope * sq[l];
                        }
                    }
                }
                let yt = y0 * (rate * x[self.grid.steps()]).exp();
                for l in 0..nz {
                    g[nz + l] = rate * yt * sq[l];
                }
            }
        }
        Ok(g)
    }

    /// `‖DΨ(z)‖_ℋ` in Hilbert–Schmidt norm.
    pub fn gradient_norm(&self, z: &[f64]) -> Result<f64> {
        Ok(norm(&self.gradient(z)?))
    }

    /// Compares the analytic gradient with forward differences along random
    /// unit directions.
    pub fn validate_gradient(&self, samples: usize, seed: u64) -> Result<GradientValidation> {
        let nz = self.noise_dim();
        let m = self.output_dim();
        let base = derive_seed(seed, "wlsi-fd");
        let per: Vec<Result<(f64, usize)>> = (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(base, i);
                let z = normals(&mut rng, nz);
                let psi = self.evaluate(&z)?;
                let grad = self.gradient(&z)?;
                let gnorm = norm(&grad);
                let mut worst = 0.0f64;
                for _ in 0..FD_DIRECTIONS {
                    let mut h = normals(&mut rng, nz);
                    let hn = norm(&h);
                    h.iter_mut().for_each(|v| *v /= hn);
                    let zs: Vec<f64> = z.iter().zip(&h).map(|(a, b)| a + FD_STEP * b).collect();
                    let shifted = self.evaluate(&zs)?;
                    let err: Vec<f64> = (0..m)
                        .map(|k| {
                            let fd = (shifted[k] - psi[k]) / FD_STEP;
                            let an: f64 = grad[k * nz..(k + 1) * nz].iter().zip(&h).map(|(a, b)| a * b).sum();
                            fd - an
                        })
                        .collect();
                    worst = worst.max(norm(&err) / (1.0 + gnorm));
                }
                Ok((worst, FD_DIRECTIONS))
            })
            .collect();
        let mut worst = 0.0f64;
        let mut checks = 0;
        for r in per {
            let (w, c) = r?;
            worst = worst.max(w);
            checks += c;
        }
        Ok(GradientValidation { checks, worst_relative_error: worst, passed: worst <= FD_TOLERANCE })
    }

    /// Standard normal coordinates of sample `index`.
    pub fn noise(&self, seed: u64, index: u64) -> Vec<f64> {
        normals(&mut stream_rng(derive_seed(seed, "wlsi-noise"), index), self.noise_dim())
    }

    /// `n` independent samples of `(Ψ, ‖DΨ‖_ℋ)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<(Vec<f64>, f64)>> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let z = self.noise(seed, i);
                Ok((self.evaluate(&z)?, self.gradient_norm(&z)?))
            })
            .collect()
    }
}

/// Grid Hölder seminorm `max_{i<j} |X_j − X_i| / (t_j − t_i)^α` and its
/// maximising pair.
fn holder_argmax(grid: &TimeGrid, x: &[f64], dim: usize, alpha: f64) -> (f64, Option<(usize, usize)>) {
    let n = grid.steps();
    let mut best = (0.0, None);
    for i in 0..n {
        for j in i + 1..=n {
            let inc: f64 = (0..dim).map(|a| (x[j * dim + a] - x[i * dim + a]).powi(2)).sum::<f64>().sqrt();
            let v = inc / (grid.t(j) - grid.t(i)).powf(alpha);
            if v > best.0 {
                best = (v, Some((i, j)));
            }
        }
    }
    best
}

/// Piecewise-linear `𝕏_{s,t}`, row-major `d × d`.
fn area(x: &[f64], dim: usize, s: usize, t: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim * dim];
    for l in s..t {
        for a in 0..dim {
            for b in 0..dim {
                let da = x[(l + 1) * dim + a] - x[l * dim + a];
                let db = x[(l + 1) * dim + b] - x[l * dim + b];
                out[a * dim + b] += (x[l * dim + a] - x[s * dim + a]) * db + 0.5 * da * db;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientValidation {
    pub checks: usize,
    /// `max |FD − ⟨DΨ,h⟩| / (1 + ‖DΨ‖)`.
    pub worst_relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoundReport {
    pub n: usize,
    pub weight: String,
    pub stated_c: f64,
    /// Fraction of samples with `‖DΨ‖² ≤ c·G(Ψ)`.
    pub fraction: f64,
    /// Smallest `c` valid on every sample.
    pub fitted_c: f64,
    /// Slope of `log ‖DΨ‖` against `Ψ₁^p` (RDE endpoint only).
    pub envelope_slope: Option<f64>,
    pub validation: GradientValidation,
    pub passed: bool,
}

/// Checks the contraction-principle hypothesis `‖DΨ‖² ≤ c·G(Ψ)` pointwise.
pub fn check_gradient_bound(
    spec: &FunctionalSpec,
    weight: &WeightSpec,
    n: usize,
    seed: u64,
) -> Result<GradientBoundReport> {
    if n == 0 {
        return domain("need at least one sample");
    }
    let validation = spec.validate_gradient(FD_SAMPLES, seed)?;
    if !validation.passed {
        return Err(Error::Contract(format!(
            "gradient oracle disagrees with finite differences (relative error {:.3e})",
            validation.worst_relative_error
        )));
    }
    let samples = spec.sample(n, seed)?;
    let ratios: Vec<f64> = samples.iter().map(|(x, g)| g * g / weight.eval(x)).collect();
    let good = ratios.iter().filter(|r| **r <= weight.c * (1.0 + 1e-12)).count();
    let fitted_c = ratios.iter().cloned().fold(0.0, f64::max);
    let envelope_slope = match spec.kind {
        FunctionalKind::RdeEndpoint { p, .. } => {
            let (xs, ys): (Vec<f64>, Vec<f64>) =
                samples.iter().filter(|(_, g)| *g > 0.0).map(|(x, g)| (x[0].powf(p), g.ln())).unzip();
            (xs.len() > 2).then(|| linear_fit(&xs, &ys).slope)
        }
        _ => None,
    };
    let fraction = good as f64 / n as f64;
    Ok(GradientBoundReport {
        n,
        weight: weight.weight.name(),
        stated_c: weight.c,
        fraction,
        fitted_c,
        envelope_slope,
        validation,
        passed: good == n,
    })
}

/// Smooth test functions on `ℝ^m` with analytic gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum TestFunction {
    Constant { value: f64 },
    Coordinate { i: usize },
    /// `tanh(a·x_i + b)`
    Tanh { i: usize, a: f64, b: f64 },
    /// `x_i · x_j`
    Product { i: usize, j: usize },
}

impl TestFunction {
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            TestFunction::Constant { value } => value,
            TestFunction::Coordinate { i } => x[i],
            TestFunction::Tanh { i, a, b } => (a * x[i] + b).tanh(),
            TestFunction::Product { i, j } => x[i] * x[j],
        }
    }

    /// `|∇f(x)|²`.
    pub fn gradient_sq(&self, x: &[f64]) -> f64 {
        match *self {
            TestFunction::Constant { .. } => 0.0,
            TestFunction::Coordinate { .. } => 1.0,
            TestFunction::Tanh { i, a, b } => {
                let s = 1.0 - (a * x[i] + b).tanh().powi(2);
                (a * s).powi(2)
            }
            TestFunction::Product { i, j } if i == j => (2.0 * x[i]).powi(2),
            TestFunction::Product { i, j } => x[i] * x[i] + x[j] * x[j],
        }
    }

    pub fn max_index(&self) -> Option<usize> {
        match *self {
            TestFunction::Constant { .. } => None,
            TestFunction::Coordinate { i } | TestFunction::Tanh { i, .. } => Some(i),
            TestFunction::Product { i, j } => Some(i.max(j)),
        }
    }
}

/// Coordinates, `tanh(a·x_i + b)` for a few `(a, b)`, and pair products.
pub fn standard_family(m: usize) -> Vec<TestFunction> {
    let mut fam: Vec<TestFunction> = (0..m).map(|i| TestFunction::Coordinate { i }).collect();
    for i in 0..m {
        for (a, b) in [(1.0, 0.0), (0.5, 1.0), (2.0, -0.5)] {
            fam.push(TestFunction::Tanh { i, a, b });
        }
    }
    for i in 0..m {
        for j in i + 1..m {
            fam.push(TestFunction::Product { i, j });
        }
    }
    fam
}

/// Jackknife-corrected plug-in estimate of `Ent(g) = E[g log g] − E[g] log E[g]`
/// for nonnegative `g`. Returns `(estimate, standard error)`.
pub fn entropy_jackknife(g: &[f64]) -> (f64, f64) {
    let n = g.len();
    let nf = n as f64;
    // Ent is 1-homogeneous; normalising by the mean limits cancellation.
    let scale = pairwise_sum(g) / nf;
    if !(scale > 0.0) {
        return (0.0, 0.0);
    }
    let g: Vec<f64> = g.iter().map(|v| v / scale).collect();
    let glog: Vec<f64> = g.iter().map(|v| v * v.max(LOG_GUARD).ln()).collect();
    let sa = pairwise_sum(&glog);
    let sb = pairwise_sum(&g);
    let plug = |a: f64, b: f64| a - b * b.max(LOG_GUARD).ln();
    let full = plug(sa / nf, sb / nf);
    if n < 2 {
        return (scale * full, f64::INFINITY);
    }
    let loo: Vec<f64> =
        (0..n).map(|i| plug((sa - glog[i]) / (nf - 1.0), (sb - g[i]) / (nf - 1.0))).collect();
    let loo_mean = mean(&loo);
    let est = nf * full - (nf - 1.0) * loo_mean;
    let ss: f64 = loo.iter().map(|v| (v - loo_mean).powi(2)).sum();
    (scale * est, scale * ((nf - 1.0) / nf * ss).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WlsiRow {
    pub function: TestFunction,
    pub entropy: f64,
    pub entropy_se: f64,
    /// `2c ∫ |∇f|² G dμ`
    pub dirichlet: f64,
    pub dirichlet_se: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WlsiReport {
    pub n: usize,
    pub weight: String,
    pub c: f64,
    pub rows: Vec<WlsiRow>,
    pub dropped: Vec<TestFunction>,
    /// Smallest `C` with `Ent ≤ 2C∫|∇f|²G` across the family.
    pub smallest_constant: f64,
    pub passed: bool,
}

/// Entropy–energy comparison on samples `x` with per-sample weights `w`
/// (already including the constant).
fn wlsi_on_samples(
    x: &[Vec<f64>],
    w: &[f64],
    c: f64,
    weight_name: String,
    family: &[TestFunction],
) -> Result<WlsiReport> {
    let n = x.len();
    if n < 2 {
        return domain("need at least two samples");
    }
    let m = x[0].len();
    if family.iter().any(|f| f.max_index().is_some_and(|i| i >= m)) {
        return domain("test function refers to a coordinate beyond the output dimension");
    }
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    let mut smallest = 0.0f64;
    for f in family {
        let g: Vec<f64> = x.iter().map(|xi| f.value(xi).powi(2)).collect();
        if !(mean(&g) >= MIN_SECOND_MOMENT) || g.iter().any(|v| !v.is_finite()) {
            dropped.push(*f);
            continue;
        }
        let (entropy, entropy_se) = entropy_jackknife(&g);
        let energy: Vec<f64> = x.iter().zip(w).map(|(xi, wi)| 2.0 * f.gradient_sq(xi) * wi).collect();
        let dirichlet = mean(&energy);
        let dirichlet_se = crate::stats::std_error(&energy);
        let sigma = entropy_se.hypot(dirichlet_se);
        if dirichlet > 0.0 {
            smallest = smallest.max(c * entropy / dirichlet);
        } else if entropy > sigma * SIGMAS {
            smallest = f64::INFINITY;
        }
        rows.push(WlsiRow {
            function: *f,
            entropy,
            entropy_se,
            dirichlet,
            dirichlet_se,
            passed: entropy <= dirichlet + SIGMAS * sigma,
        });
    }
    let passed = rows.iter().all(|r| r.passed);
    Ok(WlsiReport { n, weight: weight_name, c, rows, dropped, smallest_constant: smallest, passed })
}

/// Monte Carlo check of `Ent_μ(f²) ≤ 2c ∫ |∇f|² G dμ` for the law of `Ψ`.
pub fn check_wlsi(
    spec: &FunctionalSpec,
    weight: &WeightSpec,
    family: &[TestFunction],
    n: usize,
    seed: u64,
) -> Result<WlsiReport> {
    let samples = spec.sample(n, seed)?;
    let x: Vec<Vec<f64>> = samples.into_iter().map(|s| s.0).collect();
    let w: Vec<f64> = x.iter().map(|xi| weight.c * weight.eval(xi)).collect();
    wlsi_on_samples(&x, &w, weight.c, weight.weight.name(), family)
}

/// Check for the marginal obtained by dropping coordinate `drop`, with the
/// conditional weight `E[G | x_{−drop}]` estimated by `k`-nearest neighbours
/// (`k = ⌈√n⌉`) in standardised coordinates.
pub fn check_marginal_wlsi(
    spec: &FunctionalSpec,
    weight: &WeightSpec,
    drop: usize,
    family: &[TestFunction],
    n: usize,
    seed: u64,
) -> Result<WlsiReport> {
    let m = spec.output_dim();
    if m < 2 || drop >= m {
        return domain("marginal check needs m ≥ 2 and a valid coordinate");
    }
    let samples = spec.sample(n, seed)?;
    let full: Vec<Vec<f64>> = samples.into_iter().map(|s| s.0).collect();
    let g: Vec<f64> = full.iter().map(|xi| weight.eval(xi)).collect();
    let kept: Vec<Vec<f64>> = full
        .iter()
        .map(|xi| xi.iter().enumerate().filter(|(i, _)| *i != drop).map(|(_, v)| *v).collect())
        .collect();
    let cond = knn_conditional_mean(&kept, &g);
    let w: Vec<f64> = cond.iter().map(|v| weight.c * v).collect();
    wlsi_on_samples(&kept, &w, weight.c, format!("E[{} | x_-{}]", weight.weight.name(), drop + 1), family)
}

/// `k`-NN regression of `y` on `x` at the sample points, `k = ⌈√n⌉`.
pub fn knn_conditional_mean(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let k = ((n as f64).sqrt().ceil() as usize).clamp(1, n);
    let dim = x[0].len();
    let scale: Vec<f64> = (0..dim)
        .map(|a| {
            let col: Vec<f64> = x.iter().map(|v| v[a]).collect();
            let sd = crate::stats::variance(&col).sqrt();
            if sd > 0.0 { sd } else { 1.0 }
        })
        .collect();
    let z: Vec<Vec<f64>> = x.iter().map(|v| v.iter().zip(&scale).map(|(a, s)| a / s).collect()).collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<(f64, usize)> = z
                .iter()
                .enumerate()
                .map(|(j, zj)| (zj.iter().zip(&z[i]).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), j))
                .collect();
            d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d[..k].iter().map(|(_, j)| y[*j]).sum::<f64>() / k as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub p: f64,
    pub coordinate: usize,
    /// `‖f‖_{L^p}` for the centred, 1-Lipschitz coordinate map.
    pub lhs: f64,
    pub lhs_se: f64,
    /// `√(p−1)·‖c·G‖_{L^p}`
    pub rhs: f64,
    pub rhs_se: f64,
    /// `√(p−1)·‖√(c·G)‖_{L^p}`, the dimensionally homogeneous variant.
    pub rhs_sqrt: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub n: usize,
    pub rows: Vec<MomentRow>,
    /// Exponents dropped for an effective sample size of `G^p` below the minimum.
    pub dropped: Vec<f64>,
    pub passed: bool,
}

fn lp_norm_with_se(v: &[f64], p: f64) -> (f64, f64) {
    let pw: Vec<f64> = v.iter().map(|x| x.abs().powf(p)).collect();
    let m = mean(&pw);
    let se = crate::stats::std_error(&pw);
    let norm = m.powf(1.0 / p);
    let d = if m > 0.0 { m.powf(1.0 / p - 1.0) / p } else { 0.0 };
    (norm, d * se)
}

/// Moment consequence `‖f‖_{L^p(μ)} ≤ √(p−1)‖G_eff‖_{L^p(μ)}` with
/// `G_eff = c·G`, for the re-centred coordinate maps.
pub fn check_moment_consequence(
    spec: &FunctionalSpec,
    weight: &WeightSpec,
    p_grid: &[f64],
    n: usize,
    seed: u64,
) -> Result<MomentReport> {
    if p_grid.iter().any(|p| !(*p >= 2.0)) {
        return domain("moment exponents must be at least 2");
    }
    let samples = spec.sample(n, seed)?;
    let x: Vec<Vec<f64>> = samples.into_iter().map(|s| s.0).collect();
    moments_on_samples(&x, weight, p_grid)
}

fn moments_on_samples(x: &[Vec<f64>], weight: &WeightSpec, p_grid: &[f64]) -> Result<MomentReport> {
    let n = x.len();
    if n < 2 {
        return domain("need at least two samples");
    }
    let m = x[0].len();
    let g: Vec<f64> = x.iter().map(|xi| weight.c * weight.eval(xi)).collect();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for &p in p_grid {
        let gp: Vec<f64> = g.iter().map(|v| v.powf(p)).collect();
        let s1 = pairwise_sum(&gp);
        let s2 = pairwise_sum(&gp.iter().map(|v| v * v).collect::<Vec<_>>());
        let ess = if s2 > 0.0 { s1 * s1 / s2 } else { 0.0 };
        if !(ess >= MIN_MOMENT_ESS) {
            dropped.push(p);
            continue;
        }
        let (gn, gse) = lp_norm_with_se(&g, p);
        let sqrt_g: Vec<f64> = g.iter().map(|v| v.sqrt()).collect();
        let (sn, _) = lp_norm_with_se(&sqrt_g, p);
        let k = (p - 1.0).sqrt();
        for i in 0..m {
            let col: Vec<f64> = x.iter().map(|v| v[i]).collect();
            let mu = mean(&col);
            let centred: Vec<f64> = col.iter().map(|v| v - mu).collect();
            let (fnorm, fse) = lp_norm_with_se(&centred, p);
            let sigma = fse.hypot(k * gse);
            rows.push(MomentRow {
                p,
                coordinate: i,
                lhs: fnorm,
                lhs_se: fse,
                rhs: k * gn,
                rhs_se: k * gse,
                rhs_sqrt: k * sn,
                passed: fnorm <= k * gn + SIGMAS * sigma,
            });
        }
    }
    let passed = rows.iter().all(|r| r.passed);
    Ok(MomentReport { n, rows, dropped, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::uniform(1.0, n).unwrap()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let specs = [
            FunctionalSpec::cosine_polynomial(grid(32), vec![1, 2, 3]).unwrap(),
            FunctionalSpec::new(FunctionalKind::RoughPathTriple { alpha: 0.3, dim: 2, s: 4, t: 20 }, grid(32))
                .unwrap(),
            FunctionalSpec::new(FunctionalKind::RdeEndpoint { rate: 0.7, y0: 1.5, p: 2.5 }, grid(32)).unwrap(),
        ];
        for s in &specs {
            let v = s.validate_gradient(FD_SAMPLES, 3).unwrap();
            assert!(v.passed, "{:?}: {}", s.kind, v.worst_relative_error);
        }
    }

    #[test]
    fn entropy_is_homogeneous() {
        let g: Vec<f64> = (0..50).map(|i| ((i as f64) * 0.37).sin().powi(2)).collect();
        let scaled: Vec<f64> = g.iter().map(|v| 4.0 * v).collect();
        let (a, sa) = entropy_jackknife(&g);
        let (b, sb) = entropy_jackknife(&scaled);
        assert!((b - 4.0 * a).abs() < 1e-12 * (1.0 + a.abs()));
        assert!((sb - 4.0 * sa).abs() < 1e-10 * (1.0 + sa));
    }

    #[test]
    fn constant_function_has_zero_entropy() {
        let (e, se) = entropy_jackknife(&[2.0; 10]);
        assert!(e.abs() < 1e-12 && se < 1e-12);
    }

    #[test]
    fn stated_constants() {
        let s = FunctionalSpec::cosine_polynomial(grid(16), vec![1]).unwrap();
        let w = s.stated_weight();
        assert!((w.c - 1.0).abs() < 1e-12);
        assert_eq!(w.weight, Weight::L1Square);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(FunctionalSpec::new(FunctionalKind::RoughPathTriple { alpha: 0.6, dim: 1, s: 0, t: 2 }, grid(4))
            .is_err());
        assert!(FunctionalSpec::new(FunctionalKind::RdeEndpoint { rate: 1.0, y0: 1.0, p: 3.5 }, grid(4)).is_err());
        assert!(FunctionalSpec::new(
            FunctionalKind::PolynomialWienerIntegrals { integrands: vec![vec![1.0; 3]], powers: vec![1] },
            grid(4)
        )
        .is_err());
    }
}
