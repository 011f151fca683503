//! The registered functionals and their cost exponents.

use crate::error::{domain, shape, Error, Result};
use crate::gauss_sim::{CameronMartinShift, DriverSpec, GaussianSampler};
use crate::grid::TimeGrid;
use crate::path::Path;
use crate::rde::{solve_rde, VectorFieldSpec};
use crate::rough_path::{lift_piecewise_linear, path_pvar_distance, pvar_distance, translate, RoughPath};
use crate::rough_vol::{
    dgamma_distance, gamma_distance, holder_seminorm, lift_modelled_distribution, log_price, Anchors, BrownianNoise,
    ItoModel, ModelPairings, ModelledDistribution, SymbolSet, TestFunctionFamily, VolatilityFunction,
};

use super::ShiftableFunctional;

fn check_shift(driver: &DriverSpec, grid: &TimeGrid, h: Option<&CameronMartinShift>) -> Result<()> {
    match h {
        Some(h) if h.driver() != driver || h.grid() != grid => shape("shift belongs to a different driver or grid"),
        _ => Ok(()),
    }
}

/// Degree of a polynomial volatility function, ignoring trailing zeros.
fn polynomial_degree(f: &VolatilityFunction) -> Result<usize> {
    f.validate()?;
    match f {
        VolatilityFunction::Polynomial { coeffs } => Ok(coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0)),
        _ => Err(Error::Config("this cost is registered for polynomial volatility functions only".into())),
    }
}

/// The noise itself, measured in the Cameron–Martin pseudo-metric: the
/// distance of two noises is `‖ω₁ − ω₂‖_ℋ` when the difference lies in `ℋ`
/// and `+∞` otherwise. Two independent samples differ by a non-`ℋ` element,
/// so only the synchronous coupling has finite cost.
pub struct WhiteNoiseIdentity {
    pub driver: DriverSpec,
    pub grid: TimeGrid,
}

/// A noise sample recorded by its index and the shift applied to it.
#[derive(Debug, Clone)]
pub struct NoisePoint {
    pub index: u64,
    pub shift: Option<CameronMartinShift>,
}

impl ShiftableFunctional for WhiteNoiseIdentity {
    type Output = NoisePoint;

    fn name(&self) -> String {
        "white-noise identity".into()
    }

    fn metric(&self) -> String {
        "Cameron-Martin pseudo-metric".into()
    }

    fn evaluate(&self, index: u64, shift: Option<&CameronMartinShift>) -> Result<NoisePoint> {
        check_shift(&self.driver, &self.grid, shift)?;
        Ok(NoisePoint { index, shift: shift.cloned() })
    }

    fn distance(&self, a: &NoisePoint, b: &NoisePoint) -> Result<f64> {
        if a.index != b.index {
            return Ok(f64::INFINITY);
        }
        Ok(match (&a.shift, &b.shift) {
            (None, None) => 0.0,
            (Some(h), None) | (None, Some(h)) => h.norm(),
            (Some(x), Some(y)) => x.add(&y.scaled(-1.0))?.norm(),
        })
    }

    fn cost_exponent(&self) -> f64 {
        1.0
    }

    fn ot_compatible(&self) -> bool {
        false
    }
}

/// Piecewise-linear lift of a Gaussian driver, in the inhomogeneous
/// p-variation distance; cost `d^{1/2}` with `α(t) = C (t ∧ t²)`.
pub struct RoughPathLift {
    pub sampler: GaussianSampler,
    pub seed: u64,
    pub p: f64,
}

impl RoughPathLift {
    fn lift(&self, index: u64, h: Option<&CameronMartinShift>) -> Result<RoughPath> {
        check_shift(self.sampler.spec(), self.sampler.grid(), h)?;
        let rp = lift_piecewise_linear(&self.sampler.sample(self.seed, index));
        match h {
            Some(h) => translate(&rp, h),
            None => Ok(rp),
        }
    }
}

impl ShiftableFunctional for RoughPathLift {
    type Output = RoughPath;

    fn name(&self) -> String {
        "rough path lift".into()
    }

    fn metric(&self) -> String {
        format!("{}-variation rough path distance", self.p)
    }

    fn evaluate(&self, index: u64, shift: Option<&CameronMartinShift>) -> Result<RoughPath> {
        self.lift(index, shift)
    }

    fn distance(&self, a: &RoughPath, b: &RoughPath) -> Result<f64> {
        pvar_distance(a, b, self.p)
    }

    fn cost_exponent(&self) -> f64 {
        0.5
    }

    fn alpha_exponents(&self) -> (f64, f64) {
        (1.0, 2.0)
    }
}

/// Solution of `dY = V(Y) d𝐗` driven by the lifted Gaussian driver, in the
/// p-variation path distance; cost `d^{1/q}` with `q` the complementary
/// Young exponent of the Cameron–Martin space.
pub struct RdeFunctional {
    lift: RoughPathLift,
    q: f64,
    field: VectorFieldSpec,
    y0: Vec<f64>,
}

impl RdeFunctional {
    /// Requires `1/p + 1/q > 1` and, for drivers with Hurst index `H`,
    /// `q > 1/(H + ½)` so that Cameron–Martin paths have finite q-variation.
    pub fn new(sampler: GaussianSampler, seed: u64, p: f64, q: f64, field: VectorFieldSpec, y0: Vec<f64>) -> Result<Self> {
        if !(q >= 1.0 && 1.0 / p + 1.0 / q > 1.0) {
            return Err(Error::Config(format!("q = {q} is not complementary to p = {p}")));
        }
        if let Some(hurst) = sampler.spec().hurst() {
            if q <= 1.0 / (hurst + 0.5) && hurst < 0.5 {
                return Err(Error::Config(format!("q = {q} too small for Hurst index {hurst}")));
            }
        }
        if field.drive_dim() != sampler.spec().dim || field.state_dim() != y0.len() {
            return shape("vector field does not match driver or initial value");
        }
        Ok(Self { lift: RoughPathLift { sampler, seed, p }, q, field, y0 })
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

impl ShiftableFunctional for RdeFunctional {
    type Output = Path;

    fn name(&self) -> String {
        "RDE solution".into()
    }

    fn metric(&self) -> String {
        format!("{}-variation path distance", self.lift.p)
    }

    fn evaluate(&self, index: u64, shift: Option<&CameronMartinShift>) -> Result<Path> {
        Ok(solve_rde(&self.lift.lift(index, shift)?, &self.field, &self.y0)?.to_path())
    }

    fn distance(&self, a: &Path, b: &Path) -> Result<f64> {
        path_pvar_distance(a, b, self.lift.p)
    }

    fn cost_exponent(&self) -> f64 {
        1.0 / self.q
    }
}

fn brownian_noise(grid: &TimeGrid, seed: u64, index: u64, h: Option<&CameronMartinShift>) -> Result<BrownianNoise> {
    check_shift(&DriverSpec::brownian(1), grid, h)?;
    let noise = BrownianNoise::sample(grid, seed, index);
    match h {
        Some(h) => noise.shifted(h),
        None => Ok(noise),
    }
}

/// A model together with its pairings against the test family.
#[derive(Debug, Clone)]
pub struct ModelSample {
    pub model: ItoModel,
    pub pairings: ModelPairings,
}

/// The Itô model of the rough-volatility structure, in the model distance
/// including the `Γ` part; cost `d^{1/(M+1)}`.
pub struct ItoModelFunctional {
    pub grid: TimeGrid,
    pub symbols: SymbolSet,
    pub family: TestFunctionFamily,
    pub seed: u64,
}

impl ItoModelFunctional {
    pub fn new(grid: TimeGrid, hurst: f64, kappa: f64, family: TestFunctionFamily, seed: u64) -> Result<Self> {
        Ok(Self { grid, symbols: SymbolSet::new(hurst, kappa)?, family, seed })
    }

    fn sample(&self, index: u64, h: Option<&CameronMartinShift>) -> Result<ModelSample> {
        let noise = brownian_noise(&self.grid, self.seed, index, h)?;
        let model = ItoModel::build(&noise, self.symbols.hurst, self.symbols.kappa, Anchors::Default)?;
        let pairings = ModelPairings::new(&model, &self.family)?;
        Ok(ModelSample { model, pairings })
    }
}

fn model_sample_distance(a: &ModelSample, b: &ModelSample) -> Result<f64> {
    Ok(a.pairings.distance(&b.pairings)? + gamma_distance(&a.model, &b.model)?)
}

impl ShiftableFunctional for ItoModelFunctional {
    type Output = ModelSample;

    fn name(&self) -> String {
        "Ito model".into()
    }

    fn metric(&self) -> String {
        "model distance".into()
    }

    fn evaluate(&self, index: u64, shift: Option<&CameronMartinShift>) -> Result<ModelSample> {
        self.sample(index, shift)
    }

    fn distance(&self, a: &ModelSample, b: &ModelSample) -> Result<f64> {
        model_sample_distance(a, b)
    }

    fn cost_exponent(&self) -> f64 {
        1.0 / (self.symbols.m + 1) as f64
    }
}

/// Driftless log-price `∫ f(Ŵ_t, t) dW_t` for a polynomial `f` of degree
/// `r`, in the `C^γ` norm (Hölder seminorm plus supremum); cost
/// `d^{1/(r+1)}`.
pub struct LogPriceFunctional {
    grid: TimeGrid,
    hurst: f64,
    f: VolatilityFunction,
    gamma: f64,
    degree: usize,
    seed: u64,
}

impl LogPriceFunctional {
    pub fn new(grid: TimeGrid, hurst: f64, f: VolatilityFunction, gamma: f64, seed: u64) -> Result<Self> {
        let degree = polynomial_degree(&f)?;
        if !(gamma > 0.0 && gamma < 0.5) {
            return domain(format!("Hölder exponent {gamma} outside (0, 1/2)"));
        }
        Ok(Self { grid, hurst, f, gamma, degree, seed })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

impl ShiftableFunctional for LogPriceFunctional {
    type Output = Path;

    fn name(&self) -> String {
        "log-price".into()
    }

    fn metric(&self) -> String {
        format!("C^{} norm", self.gamma)
    }

    fn evaluate(&self, index: u64, shift: Option<&CameronMartinShift>) -> Result<Path> {
        log_price(&brownian_noise(&self.grid, self.seed, index, shift)?, self.hurst, &self.f)
    }

    fn distance(&self, a: &Path, b: &Path) -> Result<f64> {
        a.ensure_same_grid(b)?;
        let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
        let sup = diff.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(holder_seminorm(a.grid(), &diff, self.gamma).0 + sup)
    }

    fn cost_exponent(&self) -> f64 {
        1.0 / (self.degree + 1) as f64
    }
}

/// A model with the modelled distribution `𝒟_f(Π)` it carries.
#[derive(Debug, Clone)]
pub struct ModelledSample {
    pub model: ModelSample,
    pub distribution: ModelledDistribution,
}

/// Pairs `(Π, Γ, 𝒟_f(Π))` in the flat metric; cost `d^{1/(N+M+1)}` with
/// `N` the degree of the polynomial `f`.
pub struct ModelledFunctional {
    model: ItoModelFunctional,
    f: VolatilityFunction,
    gamma: f64,
    degree: usize,
}

impl ModelledFunctional {
    pub fn new(model: ItoModelFunctional, f: VolatilityFunction, gamma: f64) -> Result<Self> {
        let degree = polynomial_degree(&f)?;
        if !(gamma > 0.0 && gamma < model.symbols.max_gamma()) {
            return domain(format!("order {gamma} outside (0, {})", model.symbols.max_gamma()));
        }
        Ok(Self { model, f, gamma, degree })
    }
}

impl ShiftableFunctional for ModelledFunctional {
    type Output = ModelledSample;

    fn name(&self) -> String {
        "modelled distribution".into()
    }

    fn metric(&self) -> String {
        format!("flat metric of order {}", self.gamma)
    }

    fn evaluate(&self, index: u64, shift: Option<&CameronMartinShift>) -> Result<ModelledSample> {
        let model = self.model.sample(index, shift)?;
        let distribution = lift_modelled_distribution(&model.model, &self.f, self.gamma)?;
        Ok(ModelledSample { model, distribution })
    }

    fn distance(&self, a: &ModelledSample, b: &ModelledSample) -> Result<f64> {
        Ok(model_sample_distance(&a.model, &b.model)? + dgamma_distance(&a.distribution, &b.distribution)?)
    }

    fn cost_exponent(&self) -> f64 {
        1.0 / (self.degree + self.model.symbols.m + 1) as f64
    }
}
