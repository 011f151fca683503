//! Two-dimensional parabolic Anderson model `∂_t u = Δu + u(ξ_ε − C_ε)` on
//! the torus of side `2π`, with spectrally mollified white noise.
//!
//! Conventions: the noise has cell variance `K²/(2π)²`, the mollifier keeps
//! the Fourier modes with `|k| ≤ 1/ε`, and the divergent renormalisation
//! constant is `C_ε = (1/2π) log(1/ε) + c₀`, where the rate is
//! `E[ξ_ε (−Δ)⁻¹ξ_ε] = Σ_{0<|k|≤1/ε} 1/(4π²|k|²)` and `c₀` is the finite
//! part of that lattice sum.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, shape, Error, Result};
use crate::rng::{derive_seed, normals, stream_rng};
use crate::stats::{linear_fit, mean, std_error};
use crate::tci::{fit_tail, TailFit};

const SIDE: f64 = 2.0 * PI;
/// Largest recommended `dt · ‖V‖_∞` for the splitting scheme.
pub const STABILITY_LIMIT: f64 = 0.5;
const BLOWUP_LIMIT: f64 = 1e300;

/// Forward and inverse 2-d transforms of a `K × K` grid.
#[derive(Clone)]
struct Fft2 {
    k: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(k: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { k, fwd: planner.plan_fft_forward(k), inv: planner.plan_fft_inverse(k) }
    }

    fn transpose(&self, a: &mut [Complex64]) {
        let k = self.k;
        for i in 0..k {
            for j in i + 1..k {
                a.swap(i * k + j, j * k + i);
            }
        }
    }

    fn run(&self, a: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        fft.process(a);
        self.transpose(a);
        fft.process(a);
        self.transpose(a);
    }

    fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut a: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.run(&mut a, &self.fwd);
        a
    }

    /// Normalised inverse; returns the real part and the largest imaginary
    /// part.
    fn inverse(&self, mut a: Vec<Complex64>) -> (Vec<f64>, f64) {
        self.run(&mut a, &self.inv);
        let norm = 1.0 / (self.k * self.k) as f64;
        let imag = a.iter().fold(0.0f64, |m, c| m.max((c.im * norm).abs()));
        (a.iter().map(|c| c.re * norm).collect(), imag)
    }
}

/// Signed frequency of DFT index `i` on a grid of size `k`.
fn frequency(i: usize, k: usize) -> f64 {
    if i <= k / 2 {
        i as f64
    } else {
        i as f64 - k as f64
    }
}

/// A real field on the `K × K` grid of the torus `[0, 2π)²`, row-major with
/// the first index along `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusField {
    k: usize,
    values: Vec<f64>,
}

impl TorusField {
    pub fn new(k: usize, values: Vec<f64>) -> Result<Self> {
        if k < 2 || !k.is_power_of_two() {
            return domain(format!("grid size {k} is not a power of two"));
        }
        if values.len() != k * k {
            return shape("field values do not match the grid");
        }
        Ok(Self { k, values })
    }

    pub fn constant(k: usize, c: f64) -> Result<Self> {
        Self::new(k, vec![c; k * k])
    }

    pub fn from_fn(k: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let h = SIDE / k as f64;
        Self::new(k, (0..k * k).map(|n| f((n / k) as f64 * h, (n % k) as f64 * h)).collect())
    }

    /// Real field from a spectrum; fails if the result has an imaginary part
    /// above `1e−12` relative to its size.
    pub fn from_spectrum(k: usize, spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != k * k {
            return shape("spectrum does not match the grid");
        }
        let (values, imag) = Fft2::new(k).inverse(spectrum);
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if imag > 1e-12 * scale {
            return Err(Error::Contract(format!("spectrum is not conjugate-symmetric (imaginary part {imag:e})")));
        }
        Self::new(k, values)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spacing(&self) -> f64 {
        SIDE / self.k as f64
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.k + j]
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        Fft2::new(self.k).forward(&self.values)
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        if self.k != other.k {
            return shape("fields live on different grids");
        }
        Ok(self.values.iter().zip(&other.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { k: self.k, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Trigonometric interpolant at an arbitrary point.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        TrigSeries::from_spectrum(self.k, &self.spectrum(), None).eval(x, y)
    }
}

/// A band-limited real function `Σ_k c_k e^{ik·x}` stored by its nonzero
/// modes, evaluated exactly at arbitrary points.
#[derive(Debug, Clone)]
pub struct TrigSeries {
    band: i64,
    modes: Vec<(i64, i64, Complex64)>,
}

impl TrigSeries {
    /// Modes of a grid spectrum, optionally restricted to `|k| ≤ cutoff`.
    /// Nyquist modes are split symmetrically so the series stays real.
    pub fn from_spectrum(k: usize, spectrum: &[Complex64], cutoff: Option<f64>) -> Self {
        let norm = 1.0 / (k * k) as f64;
        let nyq = (k / 2) as f64;
        let mut modes = Vec::new();
        let mut band = 0i64;
        for i in 0..k {
            for j in 0..k {
                let c = spectrum[i * k + j] * norm;
                if c.norm() == 0.0 {
                    continue;
                }
                let (fx, fy) = (frequency(i, k), frequency(j, k));
                if cutoff.is_some_and(|r| fx.hypot(fy) > r) {
                    continue;
                }
                let xs: &[f64] = if fx == nyq { &[nyq, -nyq] } else { &[fx] };
                let ys: &[f64] = if fy == nyq { &[nyq, -nyq] } else { &[fy] };
                let share = 1.0 / (xs.len() * ys.len()) as f64;
                for &a in xs {
                    for &b in ys {
                        modes.push((a as i64, b as i64, c * share));
                        band = band.max(a.abs() as i64).max(b.abs() as i64);
                    }
                }
            }
        }
        Self { band, modes }
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut scratch = TrigScratch::new(self.band);
        self.eval_with(x, y, &mut scratch)
    }

    fn eval_with(&self, x: f64, y: f64, s: &mut TrigScratch) -> f64 {
        s.fill(x, y);
        let b = self.band;
        self.modes.iter().map(|&(a, c, coef)| (coef * s.ex[(a + b) as usize] * s.ey[(c + b) as usize]).re).sum()
    }
}

/// Powers `e^{ikx}`, `k = −band..=band`, built by recurrence.
struct TrigScratch {
    band: i64,
    ex: Vec<Complex64>,
    ey: Vec<Complex64>,
}

impl TrigScratch {
    fn new(band: i64) -> Self {
        let n = (2 * band + 1) as usize;
        Self { band, ex: vec![Complex64::new(1.0, 0.0); n], ey: vec![Complex64::new(1.0, 0.0); n] }
    }

    fn fill(&mut self, x: f64, y: f64) {
        let b = self.band as usize;
        for (v, t) in [(&mut self.ex, x), (&mut self.ey, y)] {
            let step = Complex64::from_polar(1.0, t);
            for m in 1..=b {
                v[b + m] = v[b + m - 1] * step;
                v[b - m] = v[b + m].conj();
            }
        }
    }
}

/// `lim_{R→∞} Σ_{0<|k|≤R} 1/(4π²|k|²) − (1/2π) log R`, evaluated at
/// `R = 2048` (the remainder is `O(1/R)`).
pub fn lattice_c0() -> f64 {
    static C0: OnceLock<f64> = OnceLock::new();
    *C0.get_or_init(|| {
        let r: i64 = 2048;
        let r2 = r * r;
        let mut s = 0.0;
        for a in 0..=r {
            let rest = r2 - a * a;
            let bmax = (rest as f64).sqrt() as i64;
            for b in 0..=bmax {
                if a == 0 && b == 0 {
                    continue;
                }
                // Points off the axes occur in four sign combinations.
                let mult = match (a == 0, b == 0) {
                    (false, false) => 4.0,
                    _ => 2.0,
                };
                s += mult / (a * a + b * b) as f64;
            }
        }
        s / (4.0 * PI * PI) - (r as f64).ln() / (2.0 * PI)
    })
}

/// `C_ε = (1/2π) log(1/ε) + c₀`.
pub fn renormalisation_constant(epsilon: f64, c0: f64) -> f64 {
    (1.0 / epsilon).ln() / (2.0 * PI) + c0
}

/// White noise on the grid and its mollification at scale `ε`.
#[derive(Debug, Clone)]
pub struct MollifiedNoise {
    pub xi: TorusField,
    pub epsilon: f64,
    pub xi_eps: TorusField,
    pub c0: f64,
    pub c_eps: f64,
}

impl MollifiedNoise {
    /// Cells i.i.d. `N(0, K²/(2π)²)`; realisation `index` of `seed`.
    pub fn sample(k: usize, epsilon: f64, c0: f64, seed: u64, index: u64) -> Result<Self> {
        let mut rng = stream_rng(derive_seed(seed, "pam-noise"), index);
        let sd = k as f64 / SIDE;
        let values: Vec<f64> = normals(&mut rng, k * k).into_iter().map(|z| sd * z).collect();
        Self::from_white_noise(TorusField::new(k, values)?, epsilon, c0)
    }

    pub fn from_white_noise(xi: TorusField, epsilon: f64, c0: f64) -> Result<Self> {
        let k = xi.k();
        if !(epsilon > 0.0) || 1.0 / epsilon > (k / 2) as f64 + 1e-12 {
            return domain(format!("1/ε must lie in (0, K/2] for K = {k}"));
        }
        let mut spec = xi.spectrum();
        for i in 0..k {
            for j in 0..k {
                if frequency(i, k).hypot(frequency(j, k)) > 1.0 / epsilon + 1e-12 {
                    spec[i * k + j] = Complex64::new(0.0, 0.0);
                }
            }
        }
        let xi_eps = TorusField::from_spectrum(k, spec)?;
        Ok(Self { xi, epsilon, xi_eps, c0, c_eps: renormalisation_constant(epsilon, c0) })
    }

    /// The same white noise mollified at another scale.
    pub fn at_scale(&self, epsilon: f64) -> Result<Self> {
        Self::from_white_noise(self.xi.clone(), epsilon, self.c0)
    }

    /// `ξ_ε − C_ε`.
    pub fn renormalised_potential(&self) -> TorusField {
        self.xi_eps.map(|v| v - self.c_eps)
    }

    /// `2ξ_ε − 4C_ε`, the renormalised potential of the doubled noise.
    pub fn doubled_potential(&self) -> TorusField {
        self.xi_eps.map(|v| 2.0 * (v - 2.0 * self.c_eps))
    }
}

#[derive(Debug, Clone)]
pub struct PamSolution {
    pub times: Vec<f64>,
    pub snapshots: Vec<TorusField>,
}

impl PamSolution {
    pub fn last(&self) -> &TorusField {
        self.snapshots.last().expect("at least one snapshot")
    }
}

/// Strang splitting for `∂_t u = Δu + V u`: exact spectral heat half-steps
/// around the exact multiplication by `e^{V dt}`. Snapshots are taken at the
/// requested times, rounded to the step grid.
pub fn solve_pam(u0: &TorusField, potential: &TorusField, horizon: f64, dt: f64, snapshots: &[f64]) -> Result<PamSolution> {
    let k = u0.k();
    if potential.k() != k {
        return shape("potential and initial value live on different grids");
    }
    if !(dt > 0.0 && horizon >= 0.0) {
        return domain("need dt > 0 and a nonnegative horizon");
    }
    if dt * potential.sup_norm() > STABILITY_LIMIT {
        return domain(format!(
            "dt·‖V‖∞ = {} exceeds the stability limit {STABILITY_LIMIT}",
            dt * potential.sup_norm()
        ));
    }
    let steps = (horizon / dt).round() as usize;
    let mut marks: Vec<usize> = snapshots.iter().map(|t| (t / dt).round() as usize).collect();
    if marks.iter().any(|&m| m > steps) {
        return domain("snapshot time beyond the horizon");
    }
    if marks.is_empty() {
        marks.push(steps);
    }
    let fft = Fft2::new(k);
    let half: Vec<f64> = (0..k * k)
        .map(|n| {
            let (a, b) = (frequency(n / k, k), frequency(n % k, k));
            (-(a * a + b * b) * dt / 2.0).exp()
        })
        .collect();
    let growth: Vec<f64> = potential.values().iter().map(|v| (v * dt).exp()).collect();
    let heat = |u: &[f64]| -> Vec<f64> {
        let mut s = fft.forward(u);
        s.iter_mut().zip(&half).for_each(|(c, h)| *c *= h);
        fft.inverse(s).0
    };
    let mut u = u0.values().to_vec();
    let mut out = vec![None; marks.len()];
    for step in 0..=steps {
        for (slot, &m) in out.iter_mut().zip(&marks) {
            if m == step {
                *slot = Some(TorusField::new(k, u.clone())?);
            }
        }
        if step == steps {
            break;
        }
        u = heat(&u);
        u.iter_mut().zip(&growth).for_each(|(v, g)| *v *= g);
        u = heat(&u);
        if u.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP_LIMIT) {
            return Err(Error::Blowup { last_time: step as f64 * dt });
        }
    }
    Ok(PamSolution {
        times: marks.iter().map(|&m| m as f64 * dt).collect(),
        snapshots: out.into_iter().map(|s| s.expect("every mark is reached")).collect(),
    })
}

/// Renormalised model `∂_t u = Δu + u(ξ_ε − C_ε)`.
pub fn solve_renormalised_pam(
    u0: &TorusField,
    noise: &MollifiedNoise,
    horizon: f64,
    dt: f64,
    snapshots: &[f64],
) -> Result<PamSolution> {
    solve_pam(u0, &noise.renormalised_potential(), horizon, dt, snapshots)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeynmanKacEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
}

/// `E[u₀(x + √2 B_t) exp(∫₀ᵗ V(x + √2 B_s) ds)]` over `n_paths` Brownian
/// paths, with the time integral by the trapezoidal rule on `time_steps`
/// steps. `V` and `u₀` are evaluated exactly through their trigonometric
/// series, so no spatial interpolation error enters.
pub fn feynman_kac_estimate(
    u0: &TorusField,
    potential: &TorusField,
    t: f64,
    x: (f64, f64),
    n_paths: usize,
    time_steps: usize,
    seed: u64,
) -> Result<FeynmanKacEstimate> {
    if u0.k() != potential.k() {
        return shape("potential and initial value live on different grids");
    }
    if !(t > 0.0 && t <= 1.0) || n_paths < 2 || time_steps == 0 {
        return domain("need t ∈ (0, 1], at least two paths and one time step");
    }
    let v = TrigSeries::from_spectrum(potential.k(), &potential.spectrum(), None);
    let init = TrigSeries::from_spectrum(u0.k(), &u0.spectrum(), None);
    let dt = t / time_steps as f64;
    let sd = (2.0 * dt).sqrt();
    let base = derive_seed(seed, "feynman-kac");
    let values: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(base, p);
            let mut sv = TrigScratch::new(v.band);
            let mut si = TrigScratch::new(init.band);
            let (mut px, mut py) = x;
            let mut prev = v.eval_with(px, py, &mut sv);
            let mut integral = 0.0;
            for _ in 0..time_steps {
                let dx: f64 = StandardNormal.sample(&mut rng);
                let dy: f64 = StandardNormal.sample(&mut rng);
                px += sd * dx;
                py += sd * dy;
                let cur = v.eval_with(px, py, &mut sv);
                integral += 0.5 * (prev + cur) * dt;
                prev = cur;
            }
            init.eval_with(px, py, &mut si) * integral.exp()
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("Feynman–Kac weight overflowed".into()));
    }
    Ok(FeynmanKacEstimate { mean: mean(&values), std_error: std_error(&values), paths: n_paths })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyStudy {
    pub epsilons: Vec<f64>,
    /// `‖ũ_ε − ũ_{ε/2}‖_∞` per `ε`.
    pub renormalised: Vec<f64>,
    pub unrenormalised: Vec<f64>,
    pub renormalised_means: Vec<f64>,
    pub unrenormalised_means: Vec<f64>,
}

impl CauchyStudy {
    pub fn renormalised_decreasing(&self) -> bool {
        self.renormalised.windows(2).all(|w| w[1] < w[0])
    }

    pub fn unrenormalised_increasing(&self) -> bool {
        self.unrenormalised.windows(2).all(|w| w[1] > w[0])
    }

    /// Spatial means of the unrenormalised solutions grow along the levels.
    pub fn unrenormalised_means_grow(&self) -> bool {
        self.unrenormalised_means.windows(2).all(|w| w[1] > w[0])
    }
}

/// Solutions at time `t` from `u₀ ≡ 1` for one white noise mollified at each
/// `ε` and at `ε/2`, with and without the renormalisation constant.
pub fn cauchy_study(xi: &TorusField, epsilons: &[f64], c0: f64, t: f64, dt: f64) -> Result<CauchyStudy> {
    let mut levels: Vec<f64> = epsilons.to_vec();
    if let Some(&last) = epsilons.last() {
        levels.push(last / 2.0);
    }
    let u0 = TorusField::constant(xi.k(), 1.0)?;
    let solved: Vec<(TorusField, TorusField)> = levels
        .par_iter()
        .map(|&e| {
            let noise = MollifiedNoise::from_white_noise(xi.clone(), e, c0)?;
            let ren = solve_pam(&u0, &noise.renormalised_potential(), t, dt, &[t])?;
            let raw = solve_pam(&u0, &noise.xi_eps, t, dt, &[t])?;
            Ok((ren.last().clone(), raw.last().clone()))
        })
        .collect::<Result<_>>()?;
    let diffs = |sel: fn(&(TorusField, TorusField)) -> &TorusField| -> Result<Vec<f64>> {
        solved.windows(2).map(|w| sel(&w[0]).sup_distance(sel(&w[1]))).collect()
    };
    Ok(CauchyStudy {
        epsilons: epsilons.to_vec(),
        renormalised: diffs(|p| &p.0)?,
        unrenormalised: diffs(|p| &p.1)?,
        renormalised_means: solved.iter().map(|p| p.0.mean()).collect(),
        unrenormalised_means: solved.iter().map(|p| p.1.mean()).collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PamTailConfig {
    pub k: usize,
    pub epsilons: Vec<f64>,
    pub t: f64,
    pub dt: f64,
    pub realisations: usize,
    pub c0: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PamTailLevel {
    pub epsilon: f64,
    /// `(log|ũ_ε(t,0)|)⁺` per realisation.
    pub log_positive: Vec<f64>,
    pub fit: Option<TailFit>,
    pub refusal: Option<String>,
    /// `Ê|v(t,0)|^{1/2}` and its standard error, for the doubled-noise
    /// equation.
    pub v_half_moment: (f64, f64),
    /// Slope and R² of `√(−2 log S)` against `log R` on the tail of `|u|`,
    /// the log-normal template.
    pub lognormal_slope: Option<(f64, f64)>,
}

impl PamTailLevel {
    pub fn theta(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.theta)
    }
}

/// Pointwise tail study: per `ε`, the renormalised solution and the
/// doubled-noise solution at `(t, 0)` from `u₀ ≡ 1` over independent noises,
/// with the tail fit of `(log|ũ_ε|)⁺`.
pub fn pam_tail_study(cfg: &PamTailConfig) -> Result<Vec<PamTailLevel>> {
    let u0 = TorusField::constant(cfg.k, 1.0)?;
    cfg.epsilons
        .iter()
        .map(|&eps| {
            let pairs: Vec<(f64, f64)> = (0..cfg.realisations as u64)
                .into_par_iter()
                .map(|i| {
                    let noise = MollifiedNoise::sample(cfg.k, eps, cfg.c0, cfg.seed, i)?;
                    let u = solve_pam(&u0, &noise.renormalised_potential(), cfg.t, cfg.dt, &[cfg.t])?;
                    let v = solve_pam(&u0, &noise.doubled_potential(), cfg.t, cfg.dt, &[cfg.t])?;
                    Ok((u.last().get(0, 0), v.last().get(0, 0)))
                })
                .collect::<Result<_>>()?;
            let log_positive: Vec<f64> = pairs.iter().map(|(u, _)| u.abs().ln().max(0.0)).collect();
            let (fit, refusal) = match fit_tail(&log_positive, None) {
                Ok(f) => (Some(f), None),
                Err(Error::FitRefused(msg)) => (None, Some(msg)),
                Err(e) => return Err(e),
            };
            let roots: Vec<f64> = pairs.iter().map(|(_, v)| v.abs().sqrt()).collect();
            let abs_u: Vec<f64> = pairs.iter().map(|(u, _)| u.abs()).collect();
            let lognormal_slope = fit_tail(&abs_u, None).ok().map(|f| {
                let x: Vec<f64> = f.levels.iter().map(|r| r.ln()).collect();
                let y: Vec<f64> = f.survival.iter().map(|s| (-2.0 * s.ln()).sqrt()).collect();
                let lf = linear_fit(&x, &y);
                (lf.slope, lf.r_squared)
            });
            Ok(PamTailLevel {
                epsilon: eps,
                log_positive,
                fit,
                refusal,
                v_half_moment: (mean(&roots), std_error(&roots)),
                lognormal_slope,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_round_trip() {
        let f = TorusField::from_fn(16, |x, y| (2.0 * x).sin() + (x - 3.0 * y).cos()).unwrap();
        let g = TorusField::from_spectrum(16, f.spectrum()).unwrap();
        assert!(f.sup_distance(&g).unwrap() < 1e-13);
        assert!((f.interpolate(0.3, 1.1) - ((0.6f64).sin() + (0.3f64 - 3.3).cos())).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TorusField::constant(12, 1.0).is_err());
        let mut spec = vec![Complex64::new(0.0, 0.0); 16];
        spec[1] = Complex64::new(1.0, 0.0);
        assert!(matches!(TorusField::from_spectrum(4, spec), Err(Error::Contract(_))));
    }

    #[test]
    fn heat_eigenfunction() {
        let u0 = TorusField::from_fn(32, |x, _| x.cos()).unwrap();
        let zero = TorusField::constant(32, 0.0).unwrap();
        let sol = solve_pam(&u0, &zero, 0.5, 0.01, &[0.25, 0.5]).unwrap();
        for (t, u) in sol.times.iter().zip(&sol.snapshots) {
            let exact = u0.map(|v| v * (-t).exp());
            assert!(u.sup_distance(&exact).unwrap() < 1e-10);
        }
    }

    #[test]
    fn mollification_preserves_mass() {
        let n = MollifiedNoise::sample(32, 0.25, 0.0, 3, 0).unwrap();
        assert!((n.xi.mean() - n.xi_eps.mean()).abs() < 1e-10);
        assert!(MollifiedNoise::sample(32, 0.05, 0.0, 3, 0).is_err());
    }

    #[test]
    fn lattice_constant_is_stable() {
        // The partial sums at 2048 and 1024 agree to O(1/R).
        let r: i64 = 1024;
        let mut s = 0.0;
        for a in -r..=r {
            for b in -r..=r {
                if (a, b) != (0, 0) && a * a + b * b <= r * r {
                    s += 1.0 / (a * a + b * b) as f64;
                }
            }
        }
        let partial = s / (4.0 * PI * PI) - (r as f64).ln() / (2.0 * PI);
        assert!((partial - lattice_c0()).abs() < 2e-3, "{partial} {}", lattice_c0());
    }
}
