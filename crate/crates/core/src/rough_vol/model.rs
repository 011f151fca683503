use std::hash::{Hash, Hasher};

use crate::error::{shape, Result};
use crate::gauss_sim::{CameronMartinShift, VolterraOperator};
use crate::grid::TimeGrid;
use crate::path::{Container, Path};
use crate::rng::{fill_normals, stream_rng};

use super::binomial;
use super::symbols::SymbolSet;

/// One-dimensional white-noise increments `ΔW_i` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianNoise {
    grid: TimeGrid,
    dw: Vec<f64>,
}

impl BrownianNoise {
    pub fn new(grid: TimeGrid, dw: Vec<f64>) -> Result<Self> {
        if dw.len() != grid.steps() {
            return shape("one increment per grid cell required");
        }
        Ok(Self { grid, dw })
    }

    /// Sample `index` of the stream family keyed by `seed`.
    pub fn sample(grid: &TimeGrid, seed: u64, index: u64) -> Self {
        let mut rng = stream_rng(seed, index);
        let mut dw = vec![0.0; grid.steps()];
        fill_normals(&mut rng, &mut dw);
        for (i, v) in dw.iter_mut().enumerate() {
            *v *= grid.dt(i).sqrt();
        }
        Self { grid: grid.clone(), dw }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        if path.dim() != 1 {
            return shape("a one-dimensional Brownian path is required");
        }
        Self::new(path.grid().clone(), path.increments())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn increments(&self) -> &[f64] {
        &self.dw
    }

    /// `dW → dW + h dt` with trapezoidal cell integrals of `h`.
    pub fn shifted(&self, h: &CameronMartinShift) -> Result<Self> {
        if h.grid() != &self.grid || h.driver().dim != 1 || !h.driver().white_noise_driven() {
            return shape("shift must be a one-dimensional white-noise direction on the same grid");
        }
        let dh = h.cell_integrals();
        Ok(Self { grid: self.grid.clone(), dw: self.dw.iter().zip(&dh).map(|(a, b)| a + b).collect() })
    }

    /// The path `W_t`, starting at zero.
    pub fn path_values(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.dw.len() + 1);
        let mut acc = 0.0;
        w.push(0.0);
        for d in &self.dw {
            acc += d;
            w.push(acc);
        }
        w
    }

    /// `Ŵ^H` on the grid from the same increments.
    pub fn riemann_liouville(&self, hurst: f64) -> Result<Vec<f64>> {
        Ok(VolterraOperator::new(self.grid.clone(), hurst)?.apply(&self.dw))
    }
}

/// Base points for the stored iterated integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchors {
    /// 33 equispaced anchors.
    Default,
    Count(usize),
    /// Every grid point (intended for `N ≤ 512`).
    Full,
}

impl Anchors {
    fn indices(self, grid: &TimeGrid) -> Vec<usize> {
        match self {
            Anchors::Default => grid.subgrid_indices(33),
            Anchors::Count(k) => grid.subgrid_indices(k),
            Anchors::Full => (0..grid.len()).collect(),
        }
    }
}

/// Realisation of the rough-volatility model on a grid.
///
/// `iterated` stores `𝕎^m_{s,t} = ∫_s^t (Ŵ_r − Ŵ_s)^m dW_r` (left-point sums,
/// with `𝕎^m_{s,t} = −𝕎^m_{t,s}` for `t < s`) for every anchor `s`, every
/// `m = 1..=M` and every grid time `t`.
#[derive(Debug, Clone)]
pub struct ItoModel {
    grid: TimeGrid,
    symbols: SymbolSet,
    dw: Vec<f64>,
    w: Vec<f64>,
    what: Vec<f64>,
    anchors: Vec<usize>,
    iterated: Vec<f64>,
    id: u64,
}

impl ItoModel {
    pub fn build(noise: &BrownianNoise, hurst: f64, kappa: f64, anchors: Anchors) -> Result<Self> {
        let symbols = SymbolSet::new(hurst, kappa)?;
        let what = noise.riemann_liouville(hurst)?;
        Ok(Self::assemble(noise, symbols, what, anchors.indices(noise.grid())))
    }

    fn assemble(noise: &BrownianNoise, symbols: SymbolSet, what: Vec<f64>, anchors: Vec<usize>) -> Self {
        let grid = noise.grid().clone();
        let n = grid.steps();
        let mm = symbols.m;
        let dw = noise.increments().to_vec();
        let mut iterated = vec![0.0; anchors.len() * mm * (n + 1)];
        let mut pw = vec![0.0; mm];
        for (ai, &a) in anchors.iter().enumerate() {
            let base = ai * mm * (n + 1);
            let mut acc = vec![0.0; mm];
            for i in a..n {
                powers(what[i] - what[a], &mut pw);
                for m in 0..mm {
                    acc[m] += pw[m] * dw[i];
                    iterated[base + m * (n + 1) + i + 1] = acc[m];
                }
            }
            acc.fill(0.0);
            for i in (0..a).rev() {
                powers(what[i] - what[a], &mut pw);
                for m in 0..mm {
                    acc[m] -= pw[m] * dw[i];
                    iterated[base + m * (n + 1) + i] = acc[m];
                }
            }
        }
        let w = noise.path_values();
        let id = content_id(&dw, &what, &symbols);
        Self { grid, symbols, dw, w, what, anchors, iterated, id }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn symbols(&self) -> &SymbolSet {
        &self.symbols
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn noise(&self) -> BrownianNoise {
        BrownianNoise { grid: self.grid.clone(), dw: self.dw.clone() }
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn what(&self) -> &[f64] {
        &self.what
    }

    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    /// `t ↦ 𝕎^m_{s,t}` over the grid for the anchor at position `anchor_pos`;
    /// `m = 0` is not stored (it is `W_t − W_s`).
    pub fn iterated(&self, anchor_pos: usize, m: usize) -> &[f64] {
        assert!(m >= 1 && m <= self.symbols.m, "iterated integral order out of range");
        let n1 = self.grid.len();
        let base = (anchor_pos * self.symbols.m + (m - 1)) * n1;
        &self.iterated[base..base + n1]
    }

    /// `T_h Π`, rebuilt from the shifted increments `dW + h dt`.
    pub fn translate(&self, h: &CameronMartinShift) -> Result<Self> {
        let noise = self.noise().shifted(h)?;
        let what = noise.riemann_liouville(self.symbols.hurst)?;
        Ok(Self::assemble(&noise, self.symbols, what, self.anchors.clone()))
    }

    /// `T_h Π` computed by expanding `(Ŵ + ĥ)^m (dW + h dt)` into mixed
    /// Itô and Riemann sums around the stored model.
    pub fn translate_expanded(&self, h: &CameronMartinShift) -> Result<Self> {
        let noise = self.noise().shifted(h)?;
        let dh = h.cell_integrals();
        let hhat = VolterraOperator::new(self.grid.clone(), self.symbols.hurst)?.apply(&dh);
        let what: Vec<f64> = self.what.iter().zip(&hhat).map(|(a, b)| a + b).collect();
        let n = self.grid.steps();
        let mm = self.symbols.m;
        let mut iterated = vec![0.0; self.anchors.len() * mm * (n + 1)];
        let mut pw = vec![0.0; mm + 1];
        let mut ph = vec![0.0; mm + 1];
        let mut terms = vec![0.0; mm];
        for (ai, &a) in self.anchors.iter().enumerate() {
            let base = ai * mm * (n + 1);
            let mut cell = |i: usize, terms: &mut [f64]| {
                powers0(self.what[i] - self.what[a], &mut pw);
                powers0(hhat[i] - hhat[a], &mut ph);
                for m in 1..=mm {
                    let mut ito = 0.0;
                    let mut riemann = 0.0;
                    for j in 0..=m {
                        let c = binomial(m, j) * pw[j] * ph[m - j];
                        ito += c * self.dw[i];
                        riemann += c * dh[i];
                    }
                    terms[m - 1] = ito + riemann;
                }
            };
            let mut acc = vec![0.0; mm];
            for i in a..n {
                cell(i, &mut terms);
                for m in 0..mm {
                    acc[m] += terms[m];
                    iterated[base + m * (n + 1) + i + 1] = acc[m];
                }
            }
            acc.fill(0.0);
            for i in (0..a).rev() {
                cell(i, &mut terms);
                for m in 0..mm {
                    acc[m] -= terms[m];
                    iterated[base + m * (n + 1) + i] = acc[m];
                }
            }
        }
        let w = noise.path_values();
        let id = content_id(noise.increments(), &what, &self.symbols);
        Ok(Self {
            grid: self.grid.clone(),
            symbols: self.symbols,
            dw: noise.increments().to_vec(),
            w,
            what,
            anchors: self.anchors.clone(),
            iterated,
            id,
        })
    }

    /// Largest absolute difference over all stored arrays.
    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        let pairs = [(&self.w, &other.w), (&self.what, &other.what), (&self.iterated, &other.iterated)];
        pairs
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// `W` path plus sections `WHAT` and `WM<m>` (anchors × grid, row-major)
    /// and `ANCH` (anchor indices).
    pub fn to_container(&self) -> Container {
        let mut c = Container { times: self.grid.points().to_vec(), dim: 1, values: self.w.clone(), sections: Vec::new() };
        c.sections.push(("WHAT".into(), self.what.clone()));
        c.sections.push(("ANCH".into(), self.anchors.iter().map(|&a| a as f64).collect()));
        for m in 1..=self.symbols.m {
            let data = (0..self.anchors.len()).flat_map(|a| self.iterated(a, m).iter().copied()).collect();
            c.sections.push((format!("WM{m}"), data));
        }
        c
    }
}

/// `out[k] = x^{k+1}`.
fn powers(x: f64, out: &mut [f64]) {
    let mut p = 1.0;
    for o in out.iter_mut() {
        p *= x;
        *o = p;
    }
}

/// `out[k] = x^k`.
fn powers0(x: f64, out: &mut [f64]) {
    let mut p = 1.0;
    for o in out.iter_mut() {
        *o = p;
        p *= x;
    }
}

fn content_id(dw: &[f64], what: &[f64], symbols: &SymbolSet) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for v in dw.iter().chain(what) {
        v.to_bits().hash(&mut h);
    }
    symbols.hurst.to_bits().hash(&mut h);
    symbols.kappa.to_bits().hash(&mut h);
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stored_integrals_vanish_on_the_diagonal() {
        let g = TimeGrid::uniform(1.0, 64).unwrap();
        let noise = BrownianNoise::sample(&g, 5, 0);
        let model = ItoModel::build(&noise, 0.3, 0.05, Anchors::Count(9)).unwrap();
        assert_eq!(model.what()[0], 0.0);
        for (ai, &a) in model.anchors().iter().enumerate() {
            for m in 1..=model.symbols().m {
                assert_eq!(model.iterated(ai, m)[a], 0.0);
            }
        }
    }

    #[test]
    fn zero_shift_is_identity_and_routes_agree() {
        let g = TimeGrid::uniform(1.0, 128).unwrap();
        let noise = BrownianNoise::sample(&g, 1, 3);
        let model = ItoModel::build(&noise, 0.25, 0.02, Anchors::Default).unwrap();
        let zero = CameronMartinShift::white_noise(g.clone(), 1, vec![0.0; 129]).unwrap();
        assert_eq!(model.translate(&zero).unwrap().max_abs_difference(&model), 0.0);
        let h = CameronMartinShift::white_noise_fn(g, 1, |t| vec![2.0 * (4.0 * t).cos()]).unwrap();
        let a = model.translate(&h).unwrap();
        let b = model.translate_expanded(&h).unwrap();
        assert!(a.max_abs_difference(&b) < 1e-9);
    }
}
