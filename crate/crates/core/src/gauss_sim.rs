//! Gaussian drivers: kernels, covariances, exact grid sampling and
//! Cameron–Martin shifts.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, shape, Result};
use crate::grid::TimeGrid;
use crate::linalg::Cholesky;
use crate::path::Path;
use crate::quad;
use crate::rng::{fill_normals, stream_rng};

/// Riemann–Liouville kernel `√(2H)·t^{H−1/2}`.
pub fn volterra_kernel(hurst: f64, t: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(t > 0.0) {
        return domain(format!("Volterra kernel is singular at t = {t}"));
    }
    Ok((2.0 * hurst).sqrt() * t.powf(hurst - 0.5))
}

/// `∫_a^b K^H(r) dr` for `0 ≤ a ≤ b`, in closed form.
pub fn volterra_kernel_integral(hurst: f64, a: f64, b: f64) -> f64 {
    let e = hurst + 0.5;
    (2.0 * hurst).sqrt() / e * (b.powf(e) - a.powf(e))
}

fn check_hurst(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return domain(format!("Hurst parameter must lie in (0,1), got {h}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriverKind {
    BrownianMotion,
    FractionalBm { hurst: f64 },
    RiemannLiouville { hurst: f64 },
    OrnsteinUhlenbeck { theta: f64, sigma: f64 },
    BrownianBridge,
}

/// A `dim`-dimensional driver with independent, identically distributed
/// components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverSpec {
    pub kind: DriverKind,
    pub dim: usize,
}

impl DriverSpec {
    pub fn new(kind: DriverKind, dim: usize) -> Result<Self> {
        let spec = Self { kind, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn brownian(dim: usize) -> Self {
        Self { kind: DriverKind::BrownianMotion, dim }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return domain("driver dimension must be positive");
        }
        match self.kind {
            DriverKind::FractionalBm { hurst } | DriverKind::RiemannLiouville { hurst } => {
                check_hurst(hurst)
            }
            DriverKind::OrnsteinUhlenbeck { theta, sigma } => {
                if theta > 0.0 && sigma > 0.0 {
                    Ok(())
                } else {
                    domain("Ornstein–Uhlenbeck needs theta > 0 and sigma > 0")
                }
            }
            _ => Ok(()),
        }
    }

    pub fn hurst(&self) -> Option<f64> {
        match self.kind {
            DriverKind::BrownianMotion | DriverKind::BrownianBridge | DriverKind::OrnsteinUhlenbeck { .. } => Some(0.5),
            DriverKind::FractionalBm { hurst } | DriverKind::RiemannLiouville { hurst } => Some(hurst),
        }
    }

    /// A variation exponent `p ∈ [1,3)` for which the level-2 lift is
    /// available, or `None` (fractional kinds need `H > 1/3`).
    pub fn lift_exponent(&self) -> Option<f64> {
        let h = self.hurst()?;
        if h <= 1.0 / 3.0 {
            return None;
        }
        Some((1.0 / h + 0.1).max(1.0))
    }

    /// Drivers whose Cameron–Martin space is parametrised by an `L²`
    /// density of the underlying white noise.
    pub fn white_noise_driven(&self) -> bool {
        matches!(self.kind, DriverKind::BrownianMotion | DriverKind::RiemannLiouville { .. })
    }

    /// Covariance `E[X_s X_t]` of one component.
    pub fn covariance(&self, s: f64, t: f64, horizon: f64) -> f64 {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        match self.kind {
            DriverKind::BrownianMotion => s,
            DriverKind::BrownianBridge => s - s * t / horizon,
            DriverKind::FractionalBm { hurst } => {
                let e = 2.0 * hurst;
                0.5 * (s.powf(e) + t.powf(e) - (t - s).powf(e))
            }
            DriverKind::OrnsteinUhlenbeck { theta, sigma } => {
                sigma * sigma / (2.0 * theta) * ((-theta * (t - s)).exp() - (-theta * (t + s)).exp())
            }
            DriverKind::RiemannLiouville { hurst } => rl_covariance(hurst, s, t),
        }
    }

    /// Grid indices that carry randomness (the rest are pinned to zero).
    fn free_range(&self, grid: &TimeGrid) -> std::ops::Range<usize> {
        match self.kind {
            DriverKind::BrownianBridge => 1..grid.steps(),
            _ => 1..grid.len(),
        }
    }
}

/// `2H ∫₀^s (t−r)^{H−1/2}(s−r)^{H−1/2} dr` for `s ≤ t`.
///
/// The substitution `u = (s−r)^{H+1/2}` removes the singularity at `r = s`.
fn rl_covariance(hurst: f64, s: f64, t: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if t == s {
        return s.powf(2.0 * hurst);
    }
    let e = hurst + 0.5;
    let gap = t - s;
    let upper = s.powf(e);
    let integrand = |u: f64| (gap + u.powf(1.0 / e)).powf(hurst - 0.5);
    let tol = 1e-13 * upper.max(1e-300);
    2.0 * hurst / e * quad::integrate(integrand, 0.0, upper, tol)
}

/// Exact sampler for a driver on a fixed grid; the covariance factor is
/// computed once and shared.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    spec: DriverSpec,
    grid: TimeGrid,
    factor: Option<Arc<Cholesky>>,
}

impl GaussianSampler {
    pub fn new(spec: DriverSpec, grid: TimeGrid) -> Result<Self> {
        spec.validate()?;
        let factor = match spec.kind {
            DriverKind::BrownianMotion => None,
            _ => {
                let free = spec.free_range(&grid);
                if free.is_empty() {
                    None
                } else {
                    let cov = covariance_matrix(&spec, &grid, free.clone());
                    Some(Arc::new(Cholesky::factor(&cov, free.len())?))
                }
            }
        };
        Ok(Self { spec, grid, factor })
    }

    pub fn spec(&self) -> &DriverSpec {
        &self.spec
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Path number `index` of the stream family keyed by `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> Path {
        let mut rng = stream_rng(seed, index);
        let d = self.spec.dim;
        let n = self.grid.steps();
        let mut values = vec![0.0; self.grid.len() * d];
        match &self.factor {
            None if self.spec.kind == DriverKind::BrownianMotion => {
                let mut z = vec![0.0; n];
                for c in 0..d {
                    fill_normals(&mut rng, &mut z);
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += self.grid.dt(i).sqrt() * z[i];
                        values[(i + 1) * d + c] = acc;
                    }
                }
            }
            None => {}
            Some(l) => {
                let free = self.spec.free_range(&self.grid);
                let m = free.len();
                let mut z = vec![0.0; m];
                let mut x = vec![0.0; m];
                for c in 0..d {
                    fill_normals(&mut rng, &mut z);
                    l.mul(&z, &mut x);
                    for (k, i) in free.clone().enumerate() {
                        values[i * d + c] = x[k];
                    }
                }
            }
        }
        Path::new(self.grid.clone(), d, values).expect("sampler produces consistent shapes")
    }

    /// `n` paths with indices `0..n`, sampled in parallel.
    pub fn sample_paths(&self, n: usize, seed: u64) -> Vec<Path> {
        (0..n as u64).into_par_iter().map(|i| self.sample(seed, i)).collect()
    }

    /// Cameron–Martin shift with the given grid values (see
    /// [`CameronMartinShift`] for their meaning per driver).
    pub fn shift(&self, values: Vec<f64>) -> Result<CameronMartinShift> {
        CameronMartinShift::build(self.spec, self.grid.clone(), values, self.factor.clone())
    }
}

/// Convenience wrapper: builds the sampler and draws `n` paths.
pub fn sample_paths(spec: DriverSpec, grid: TimeGrid, n: usize, seed: u64) -> Result<Vec<Path>> {
    Ok(GaussianSampler::new(spec, grid)?.sample_paths(n, seed))
}

/// Row-major covariance matrix of one component on the given grid indices.
pub fn covariance_matrix(spec: &DriverSpec, grid: &TimeGrid, idx: std::ops::Range<usize>) -> Vec<f64> {
    let pts: Vec<f64> = idx.map(|i| grid.t(i)).collect();
    let m = pts.len();
    let horizon = grid.horizon();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (0..=i).map(|j| spec.covariance(pts[i], pts[j], horizon)).collect())
        .collect();
    let mut cov = vec![0.0; m * m];
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            cov[i * m + j] = v;
            cov[j * m + i] = v;
        }
    }
    cov
}

/// Discrete Volterra convolution on a grid: `out_i = Σ_{j<i} w_{ij} ρ_j`
/// where `ρ_j` is the cell density and `w_{ij} = ∫_{cell j} K^H(t_i − r) dr`
/// is integrated exactly.
#[derive(Debug, Clone)]
pub struct VolterraOperator {
    grid: TimeGrid,
    hurst: f64,
    toeplitz: Option<Vec<f64>>,
}

impl VolterraOperator {
    pub fn new(grid: TimeGrid, hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        let toeplitz = grid.is_uniform().then(|| {
            let h = grid.dt(0);
            (0..=grid.steps())
                .map(|k| {
                    if k == 0 {
                        0.0
                    } else {
                        volterra_kernel_integral(hurst, (k - 1) as f64 * h, k as f64 * h)
                    }
                })
                .collect()
        });
        Ok(Self { grid, hurst, toeplitz })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Applies the operator to per-cell integrals `increments` (length `N`).
    pub fn apply(&self, increments: &[f64]) -> Vec<f64> {
        let n = self.grid.steps();
        assert_eq!(increments.len(), n, "one increment per cell");
        let mut out = vec![0.0; n + 1];
        match &self.toeplitz {
            Some(w) => {
                let h = self.grid.dt(0);
                let dens: Vec<f64> = increments.iter().map(|x| x / h).collect();
                for i in 1..=n {
                    let mut s = 0.0;
                    for j in 0..i {
                        s += w[i - j] * dens[j];
                    }
                    out[i] = s;
                }
            }
            None => {
                for i in 1..=n {
                    let ti = self.grid.t(i);
                    let mut s = 0.0;
                    for j in 0..i {
                        let w = volterra_kernel_integral(self.hurst, ti - self.grid.t(j + 1), ti - self.grid.t(j));
                        s += w * increments[j] / self.grid.dt(j);
                    }
                    out[i] = s;
                }
            }
        }
        out
    }
}

/// A Cameron–Martin direction `h` discretised on a grid, `(N+1) × d` values.
///
/// For white-noise-driven kinds (Brownian motion, Riemann–Liouville fBm) the
/// values are the `L²` density of the noise shift and `‖h‖² = ∫|h|²` by the
/// trapezoidal rule. For the other kinds the values are the path-space shift
/// itself and `‖h‖²` is the exact Cameron–Martin norm of the grid marginal,
/// `vᵀ Σ⁻¹ v` per component.
#[derive(Debug, Clone)]
pub struct CameronMartinShift {
    driver: DriverSpec,
    grid: TimeGrid,
    values: Vec<f64>,
    norm_sq: f64,
    factor: Option<Arc<Cholesky>>,
}

impl CameronMartinShift {
    /// Shift of a `dim`-dimensional white noise by the density `values`.
    pub fn white_noise(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        Self::build(DriverSpec::brownian(dim), grid, values, None)
    }

    pub fn white_noise_fn(grid: TimeGrid, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let values = Path::from_fn(grid.clone(), dim, f)?.values().to_vec();
        Self::white_noise(grid, dim, values)
    }

    pub fn zero(driver: DriverSpec, grid: TimeGrid) -> Self {
        let values = vec![0.0; grid.len() * driver.dim];
        Self { driver, grid, values, norm_sq: 0.0, factor: None }
    }

    fn build(driver: DriverSpec, grid: TimeGrid, values: Vec<f64>, factor: Option<Arc<Cholesky>>) -> Result<Self> {
        let d = driver.dim;
        if values.len() != grid.len() * d {
            return shape("shift values do not match grid and dimension");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("shift values must be finite");
        }
        let norm_sq = if driver.white_noise_driven() {
            (0..d)
                .map(|c| {
                    let sq: Vec<f64> = values.iter().skip(c).step_by(d).map(|v| v * v).collect();
                    quad::trapezoid(grid.points(), &sq)
                })
                .sum()
        } else {
            let free = driver.free_range(&grid);
            for i in (0..grid.len()).filter(|i| !free.contains(i)) {
                if values[i * d..(i + 1) * d].iter().any(|&v| v != 0.0) {
                    return domain("shift must vanish where the driver is deterministic");
                }
            }
            match &factor {
                None => 0.0,
                Some(l) => (0..d)
                    .map(|c| {
                        let v: Vec<f64> = free.clone().map(|i| values[i * d + c]).collect();
                        l.solve_lower(&v).iter().map(|x| x * x).sum::<f64>()
                    })
                    .sum(),
            }
        };
        Ok(Self { driver, grid, values, norm_sq, factor })
    }

    pub fn driver(&self) -> &DriverSpec {
        &self.driver
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            driver: self.driver,
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            norm_sq: c * c * self.norm_sq,
            factor: self.factor.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid || self.driver != other.driver {
            return shape("shifts belong to different drivers or grids");
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Self::build(self.driver, self.grid.clone(), values, self.factor.clone().or(other.factor.clone()))
    }

    /// Trapezoidal cell integrals `∫_{cell i} h`, `N × d` (white-noise kinds).
    pub fn cell_integrals(&self) -> Vec<f64> {
        let d = self.driver.dim;
        let mut out = vec![0.0; self.grid.steps() * d];
        for i in 0..self.grid.steps() {
            for c in 0..d {
                out[i * d + c] = 0.5 * (self.values[i * d + c] + self.values[(i + 1) * d + c]) * self.grid.dt(i);
            }
        }
        out
    }

    /// The image of `h` in path space, `(N+1) × d`.
    pub fn path_shift(&self) -> Vec<f64> {
        let d = self.driver.dim;
        match self.driver.kind {
            DriverKind::BrownianMotion => {
                let inc = self.cell_integrals();
                let mut out = vec![0.0; self.grid.len() * d];
                for i in 0..self.grid.steps() {
                    for c in 0..d {
                        out[(i + 1) * d + c] = out[i * d + c] + inc[i * d + c];
                    }
                }
                out
            }
            DriverKind::RiemannLiouville { hurst } => {
                let op = VolterraOperator::new(self.grid.clone(), hurst).expect("validated hurst");
                let inc = self.cell_integrals();
                let mut out = vec![0.0; self.grid.len() * d];
                for c in 0..d {
                    let comp: Vec<f64> = inc.iter().skip(c).step_by(d).copied().collect();
                    for (i, v) in op.apply(&comp).into_iter().enumerate() {
                        out[i * d + c] = v;
                    }
                }
                out
            }
            _ => self.values.clone(),
        }
    }
}

/// Cameron–Martin norm `‖h‖_ℋ`.
pub fn cm_norm(h: &CameronMartinShift) -> f64 {
    h.norm()
}

/// `ω + I(h)` for a path-valued driver.
pub fn shift_path(path: &Path, h: &CameronMartinShift) -> Result<Path> {
    if path.grid() != h.grid() || path.dim() != h.driver().dim {
        return shape("path and shift live on different grids");
    }
    let shift = h.path_shift();
    let values = path.values().iter().zip(&shift).map(|(a, b)| a + b).collect();
    Path::new(path.grid().clone(), path.dim(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(volterra_kernel(0.5, 0.7).unwrap(), 1.0);
        assert_eq!(volterra_kernel(0.5, 123.0).unwrap(), 1.0);
        let v = volterra_kernel(0.1, 0.25).unwrap();
        assert!((v - 0.2f64.sqrt() * 0.25f64.powf(-0.4)).abs() < 1e-15);
        assert!(volterra_kernel(0.3, 0.0).is_err());
        assert!(volterra_kernel(1.2, 1.0).is_err());
    }

    #[test]
    fn rl_half_equals_brownian_covariance() {
        let g = TimeGrid::uniform(2.0, 12).unwrap();
        let bm = covariance_matrix(&DriverSpec::brownian(1), &g, 1..13);
        let rl = DriverSpec::new(DriverKind::RiemannLiouville { hurst: 0.5 }, 1).unwrap();
        let rl = covariance_matrix(&rl, &g, 1..13);
        for (a, b) in bm.iter().zip(&rl) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn rl_diagonal_is_power_law() {
        let spec = DriverSpec::new(DriverKind::RiemannLiouville { hurst: 0.2 }, 1).unwrap();
        for t in [0.1, 0.5, 1.0, 3.0] {
            assert!((spec.covariance(t, t, 3.0) - t.powf(0.4)).abs() < 1e-14);
            // continuity of the quadrature towards the diagonal
            let near = spec.covariance(t * (1.0 - 1e-9), t, 3.0);
            assert!((near - t.powf(0.4)).abs() < 1e-3);
        }
    }

    #[test]
    fn shifts_and_norms() {
        let g = TimeGrid::uniform(1.0, 1000).unwrap();
        let c = CameronMartinShift::white_noise_fn(g.clone(), 1, |_| vec![2.0]).unwrap();
        assert!((c.norm() - 2.0).abs() < 1e-12);
        let lin = CameronMartinShift::white_noise_fn(g.clone(), 1, |t| vec![t]).unwrap();
        assert!((lin.norm() - (1.0f64 / 3.0).sqrt()).abs() < 1e-6);
        let one = CameronMartinShift::white_noise_fn(g.clone(), 1, |_| vec![1.0]).unwrap();
        let zero = Path::new(g.clone(), 1, vec![0.0; g.len()]).unwrap();
        let drift = shift_path(&zero, &one).unwrap();
        for (i, &t) in g.points().iter().enumerate() {
            assert!((drift.value(i)[0] - t).abs() < 1e-12);
        }
    }

    #[test]
    fn non_white_noise_norm_matches_rkhs_of_brownian_path() {
        // For an OU-free check use fBm with H = 1/2, whose RKHS norm of the path
        // `v` on the grid is Σ (Δv)²/Δt.
        let g = TimeGrid::uniform(1.0, 50).unwrap();
        let spec = DriverSpec::new(DriverKind::FractionalBm { hurst: 0.5 }, 1).unwrap();
        let s = GaussianSampler::new(spec, g.clone()).unwrap();
        let v: Vec<f64> = g.points().iter().map(|t| (3.0 * t).sin()).collect();
        let expect: f64 = (0..50).map(|i| (v[i + 1] - v[i]).powi(2) / g.dt(i)).sum();
        let h = s.shift(v).unwrap();
        assert!((h.norm_sq() - expect).abs() < 1e-8 * expect);
        assert!(s.shift(vec![1.0; g.len()]).is_err());
    }
}
