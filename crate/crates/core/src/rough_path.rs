//! Level-2 rough paths: piecewise-linear lifts, Chen's relation,
//! inhomogeneous p-variation and Cameron–Martin translation.

use serde::{Deserialize, Serialize};

use crate::error::{domain, shape, Error, Result};
use crate::gauss_sim::CameronMartinShift;
use crate::grid::TimeGrid;
use crate::path::{Container, Path};

/// The pair `(X_{s,t}, 𝕏_{s,t})`; `xx` is row-major `d × d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level2 {
    pub x: Vec<f64>,
    pub xx: Vec<f64>,
}

impl Level2 {
    pub fn zero(dim: usize) -> Self {
        Self { x: vec![0.0; dim], xx: vec![0.0; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Extends `self` (over `[s,u]`) by `next` (over `[u,t]`) in place.
    pub fn extend(&mut self, next_x: &[f64], next_xx: &[f64]) {
        let d = self.x.len();
        for a in 0..d {
            for b in 0..d {
                self.xx[a * d + b] += next_xx[a * d + b] + self.x[a] * next_x[b];
            }
        }
        for a in 0..d {
            self.x[a] += next_x[a];
        }
    }

    /// `|X| + |𝕏|` with Euclidean and Frobenius norms.
    pub fn size(&self) -> f64 {
        norm(&self.x) + norm(&self.xx)
    }

    pub fn sub(&self, other: &Level2) -> Level2 {
        Level2 {
            x: self.x.iter().zip(&other.x).map(|(a, b)| a - b).collect(),
            xx: self.xx.iter().zip(&other.xx).map(|(a, b)| a - b).collect(),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A [`Level2`] value attached to the interval `[s, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub s: f64,
    pub t: f64,
    pub value: Level2,
}

/// Chen's relation: combines `a` over `[s,u]` with `b` over `[u,t]`.
pub fn chen_combine(a: &Segment, b: &Segment) -> Result<Segment> {
    if a.t != b.s {
        return Err(Error::Contract(format!(
            "intervals [{}, {}] and [{}, {}] are not adjacent",
            a.s, a.t, b.s, b.t
        )));
    }
    if a.value.dim() != b.value.dim() {
        return shape("segments of different dimension");
    }
    let mut value = a.value.clone();
    value.extend(&b.value.x, &b.value.xx);
    Ok(Segment { s: a.s, t: b.t, value })
}

/// Per-cell increments and second-level integrals on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RoughPath {
    grid: TimeGrid,
    dim: usize,
    inc: Vec<f64>,
    area: Vec<f64>,
}

/// Result of a p-variation computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PVarResult {
    pub value: f64,
    /// Grid indices of the maximising dissection, `0` and `N` included.
    pub partition: Vec<usize>,
    pub p: f64,
}

impl RoughPath {
    pub fn from_parts(grid: TimeGrid, dim: usize, inc: Vec<f64>, area: Vec<f64>) -> Result<Self> {
        let n = grid.steps();
        if inc.len() != n * dim || area.len() != n * dim * dim {
            return shape("increment/area storage does not match grid");
        }
        Ok(Self { grid, dim, inc, area })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn increments(&self) -> &[f64] {
        &self.inc
    }

    pub fn areas(&self) -> &[f64] {
        &self.area
    }

    fn cell(&self, i: usize) -> (&[f64], &[f64]) {
        let d = self.dim;
        (&self.inc[i * d..(i + 1) * d], &self.area[i * d * d..(i + 1) * d * d])
    }

    /// `(X, 𝕏)` over `[t_i, t_j]` reconstructed with Chen's relation.
    pub fn increment(&self, i: usize, j: usize) -> Level2 {
        assert!(i <= j && j <= self.grid.steps(), "invalid index pair");
        let mut acc = Level2::zero(self.dim);
        for k in i..j {
            let (x, xx) = self.cell(k);
            acc.extend(x, xx);
        }
        acc
    }

    pub fn segment(&self, i: usize, j: usize) -> Segment {
        Segment { s: self.grid.t(i), t: self.grid.t(j), value: self.increment(i, j) }
    }

    /// The underlying first-level path, started at zero.
    pub fn path(&self) -> Path {
        Path::from_increments(self.grid.clone(), self.dim, &self.inc).expect("consistent storage")
    }

    /// Translation `T_h` by a path-space shift with `(N+1) × d` values.
    ///
    /// Cross integrals are the exact iterated integrals of the linear
    /// interpolants on each cell, so translation composes exactly.
    pub fn translate_by_path(&self, shift: &[f64]) -> Result<Self> {
        let d = self.dim;
        let n = self.grid.steps();
        if shift.len() != (n + 1) * d {
            return shape("shift path does not match rough path grid");
        }
        let mut inc = self.inc.clone();
        let mut area = self.area.clone();
        for i in 0..n {
            let dh: Vec<f64> = (0..d).map(|c| shift[(i + 1) * d + c] - shift[i * d + c]).collect();
            let dx = &self.inc[i * d..(i + 1) * d];
            for a in 0..d {
                for b in 0..d {
                    area[i * d * d + a * d + b] += 0.5 * (dh[a] * dx[b] + dx[a] * dh[b] + dh[a] * dh[b]);
                }
            }
            for c in 0..d {
                inc[i * d + c] += dh[c];
            }
        }
        Ok(Self { grid: self.grid.clone(), dim: d, inc, area })
    }

    pub fn to_container(&self) -> Container {
        let mut c = self.path().to_container();
        c.sections.push(("AREA".into(), self.area.clone()));
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let path = Path::from_container(c)?;
        let area = c
            .section("AREA")
            .ok_or_else(|| Error::Format("missing AREA section".into()))?
            .to_vec();
        Self::from_parts(path.grid().clone(), path.dim(), path.increments(), area)
    }
}

/// Lift of the piecewise-linear interpolant: `𝕏 = ½ X⊗X` on every cell.
pub fn lift_piecewise_linear(path: &Path) -> RoughPath {
    let d = path.dim();
    let inc = path.increments();
    let n = path.grid().steps();
    let mut area = vec![0.0; n * d * d];
    for i in 0..n {
        let x = &inc[i * d..(i + 1) * d];
        for a in 0..d {
            for b in 0..d {
                area[i * d * d + a * d + b] = 0.5 * x[a] * x[b];
            }
        }
    }
    RoughPath { grid: path.grid().clone(), dim: d, inc, area }
}

/// `T_h 𝐗` for a Cameron–Martin direction of the driver.
pub fn translate(rp: &RoughPath, h: &CameronMartinShift) -> Result<RoughPath> {
    if h.grid() != rp.grid() || h.driver().dim != rp.dim() {
        return shape("shift and rough path live on different grids");
    }
    rp.translate_by_path(&h.path_shift())
}

fn check_p(p: f64) -> Result<()> {
    if !(1.0..3.0).contains(&p) {
        return domain(format!("p must lie in [1,3), got {p}"));
    }
    Ok(())
}

/// Exact maximisation of `Σ ω(t_k, t_{k+1})^p` over all dissections made of
/// grid points. `row(i, out)` writes `ω(t_i, t_j)` into `out[j]` for `j > i`.
fn pvar_dp(n: usize, p: f64, mut row: impl FnMut(usize, &mut [f64])) -> PVarResult {
    let mut best = vec![f64::NEG_INFINITY; n + 1];
    let mut prev = vec![0usize; n + 1];
    best[0] = 0.0;
    let mut omega = vec![0.0; n + 1];
    for i in 0..n {
        row(i, &mut omega);
        let base = best[i];
        for j in i + 1..=n {
            let cand = base + omega[j].powf(p);
            if cand > best[j] {
                best[j] = cand;
                prev[j] = i;
            }
        }
    }
    let mut partition = vec![n];
    let mut k = n;
    while k > 0 {
        k = prev[k];
        partition.push(k);
    }
    partition.reverse();
    PVarResult { value: best[n].max(0.0).powf(1.0 / p), partition, p }
}

fn rough_rows<'a>(a: &'a RoughPath, b: Option<&'a RoughPath>) -> impl FnMut(usize, &mut [f64]) + 'a {
    let d = a.dim;
    move |i, out| {
        let mut acc_a = Level2::zero(d);
        let mut acc_b = Level2::zero(d);
        for j in i..a.grid.steps() {
            let (x, xx) = a.cell(j);
            acc_a.extend(x, xx);
            out[j + 1] = match b {
                None => acc_a.size(),
                Some(b) => {
                    let (y, yy) = b.cell(j);
                    acc_b.extend(y, yy);
                    acc_a.sub(&acc_b).size()
                }
            };
        }
    }
}

/// Inhomogeneous p-variation `(sup Σ (|X| + |𝕏|)^p)^{1/p}` over all
/// dissections by grid points, computed exactly by dynamic programming.
pub fn p_var_norm(rp: &RoughPath, p: f64) -> Result<PVarResult> {
    check_p(p)?;
    Ok(pvar_dp(rp.grid.steps(), p, rough_rows(rp, None)))
}

/// Brute-force enumeration of all `2^{N−1}` dissections (`N ≤ 12`).
pub fn p_var_exhaustive(rp: &RoughPath, p: f64) -> Result<PVarResult> {
    check_p(p)?;
    let n = rp.grid.steps();
    if n > 12 {
        return domain("exhaustive p-variation is limited to N ≤ 12");
    }
    let mut omega = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..=n {
        for j in i + 1..=n {
            omega[i][j] = rp.increment(i, j).size();
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for mask in 0u32..(1u32 << (n - 1)) {
        let mut pts = vec![0];
        pts.extend((1..n).filter(|k| mask & (1 << (k - 1)) != 0));
        pts.push(n);
        let s: f64 = pts.windows(2).map(|w| omega[w[0]][w[1]].powf(p)).sum();
        if s > best.0 {
            best = (s, pts);
        }
    }
    Ok(PVarResult { value: best.0.max(0.0).powf(1.0 / p), partition: best.1, p })
}

/// p-variation of the componentwise difference `(X¹−X², 𝕏¹−𝕏²)`.
pub fn pvar_distance(a: &RoughPath, b: &RoughPath, p: f64) -> Result<f64> {
    check_p(p)?;
    if a.grid != b.grid || a.dim != b.dim {
        return shape("rough paths live on different grids or dimensions");
    }
    Ok(pvar_dp(a.grid.steps(), p, rough_rows(a, Some(b))).value)
}

/// p-variation of a plain path, `(sup Σ |Y_{t_k,t_{k+1}}|^p)^{1/p}`, for any `p ≥ 1`.
pub fn path_p_var(path: &Path, p: f64) -> Result<PVarResult> {
    if !(p >= 1.0) {
        return domain("p must be at least 1");
    }
    Ok(pvar_dp(path.grid().steps(), p, |i, out| {
        let yi = path.value(i);
        for j in i + 1..=path.grid().steps() {
            out[j] = norm_diff(path.value(j), yi);
        }
    }))
}

/// p-variation distance between two plain paths on the same grid.
pub fn path_pvar_distance(a: &Path, b: &Path, p: f64) -> Result<f64> {
    a.ensure_same_grid(b)?;
    if !(p >= 1.0) {
        return domain("p must be at least 1");
    }
    let d = a.dim();
    let n = a.grid().steps();
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    Ok(pvar_dp(n, p, |i, out| {
        let yi = &diff[i * d..(i + 1) * d];
        for j in i + 1..=n {
            out[j] = norm_diff(&diff[j * d..(j + 1) * d], yi);
        }
    })
    .value)
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::uniform(1.0, n).unwrap()
    }

    #[test]
    fn diagonal_path_area() {
        let p = Path::from_fn(grid(10), 2, |t| vec![t, t]).unwrap();
        let rp = lift_piecewise_linear(&p);
        let l = rp.increment(0, 10);
        for v in &l.xx {
            assert!((v - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn circle_levy_area() {
        let n = 4096;
        let p = Path::from_fn(grid(n), 2, |t| {
            let a = 2.0 * std::f64::consts::PI * t;
            vec![a.cos(), a.sin()]
        })
        .unwrap();
        let l = lift_piecewise_linear(&p).increment(0, n);
        let area = 0.5 * (l.xx[1] - l.xx[2]);
        let polygon = 0.5 * n as f64 * (2.0 * std::f64::consts::PI / n as f64).sin();
        assert!((area - polygon).abs() < 1e-10);
        assert!((area - std::f64::consts::PI).abs() < 2e-6);
    }

    #[test]
    fn monotone_path_pvar_p1() {
        let n = 8;
        let p = Path::from_fn(grid(n), 1, |t| vec![t]).unwrap();
        let rp = lift_piecewise_linear(&p);
        let r = p_var_norm(&rp, 1.0).unwrap();
        assert!((r.value - 1.5).abs() < 1e-13, "{}", r.value);
        assert_eq!(r.partition, vec![0, n]);
        let e = p_var_exhaustive(&rp, 1.0).unwrap();
        assert!((e.value - r.value).abs() < 1e-13);
    }

    #[test]
    fn zero_path_and_errors() {
        let p = Path::new(grid(4), 2, vec![0.0; 10]).unwrap();
        let rp = lift_piecewise_linear(&p);
        assert_eq!(p_var_norm(&rp, 2.5).unwrap().value, 0.0);
        assert!(p_var_norm(&rp, 3.0).is_err());
        assert!(p_var_norm(&rp, 0.5).is_err());
        assert!(p_var_exhaustive(&lift_piecewise_linear(&Path::new(grid(13), 1, vec![0.0; 14]).unwrap()), 2.0).is_err());
    }

    #[test]
    fn chen_rejects_gaps() {
        let a = Segment { s: 0.0, t: 0.5, value: Level2::zero(1) };
        let b = Segment { s: 0.6, t: 1.0, value: Level2::zero(1) };
        assert!(matches!(chen_combine(&a, &b), Err(Error::Contract(_))));
        let c = Segment { s: 0.5, t: 0.5, value: Level2::zero(1) };
        let mut a1 = a.clone();
        a1.value.x[0] = 2.0;
        a1.value.xx[0] = 2.0;
        let r = chen_combine(&a1, &c).unwrap();
        assert_eq!(r.value, a1.value);
    }

    #[test]
    fn container_round_trip() {
        let p = Path::from_fn(grid(5), 2, |t| vec![t * t, -t]).unwrap();
        let rp = lift_piecewise_linear(&p);
        let mut buf = Vec::new();
        rp.to_container().write(&mut buf).unwrap();
        let back = RoughPath::from_container(&Container::read(buf.as_slice()).unwrap()).unwrap();
        assert_eq!(back.grid(), rp.grid());
        for (a, b) in back.increments().iter().zip(rp.increments()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(back.areas(), rp.areas());
    }
}
