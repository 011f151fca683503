//! Optimal transport between empirical measures with arbitrary costs,
//! relative entropy of Cameron–Martin shifts and the inf-convolution `P_c g`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::gauss_sim::CameronMartinShift;

const WEIGHT_TOL: f64 = 1e-12;

/// Samples with probability weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure<T> {
    samples: Vec<T>,
    weights: Vec<f64>,
}

impl<T> EmpiricalMeasure<T> {
    pub fn uniform(samples: Vec<T>) -> Result<Self> {
        if samples.is_empty() {
            return shape("empirical measure needs at least one sample");
        }
        let w = 1.0 / samples.len() as f64;
        let weights = vec![w; samples.len()];
        Ok(Self { samples, weights })
    }

    pub fn weighted(samples: Vec<T>, weights: Vec<f64>) -> Result<Self> {
        if samples.is_empty() || samples.len() != weights.len() {
            return shape("one weight per sample required");
        }
        check_weights(&weights)?;
        Ok(Self { samples, weights })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|&x| (x - w).abs() <= WEIGHT_TOL)
    }
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Contract("weights must be finite and nonnegative".into()));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL * w.len().max(1) as f64 {
        return Err(Error::Contract(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Dense row-major cost matrix `c(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return shape("cost matrix dimensions do not match its data");
        }
        if let Some(k) = data.iter().position(|c| !c.is_finite()) {
            return Err(Error::Evaluation(format!("cost entry ({}, {}) is not finite", k / cols, k % cols)));
        }
        if data.iter().any(|&c| c < 0.0) {
            return Err(Error::Contract("costs must be nonnegative".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Evaluates the cost oracle on all pairs, rows in parallel.
    pub fn from_oracle<T: Sync, U: Sync>(xs: &[T], ys: &[U], cost: impl Fn(&T, &U) -> f64 + Sync) -> Result<Self> {
        let data: Vec<f64> = xs.par_iter().flat_map_iter(|x| ys.iter().map(|y| cost(x, y)).collect::<Vec<_>>()).collect();
        Self::new(xs.len(), ys.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn median(&self) -> f64 {
        crate::stats::median(&self.data)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.rows, self.cols, self.data.iter().map(|&c| f(c)).collect())
    }
}

/// Spot-checks `c(x, x) = 0` on the given samples and, when `symmetric`, that
/// `c(x, y) = c(y, x)` on consecutive pairs.
pub fn check_cost_oracle<T>(samples: &[T], cost: impl Fn(&T, &T) -> f64, symmetric: bool) -> Result<()> {
    for (k, x) in samples.iter().enumerate() {
        let d = cost(x, x);
        if d.abs() > 1e-12 {
            return Err(Error::Contract(format!("c(x, x) = {d} at sample {k}")));
        }
    }
    if symmetric {
        for w in samples.windows(2) {
            let (a, b) = (cost(&w[0], &w[1]), cost(&w[1], &w[0]));
            if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                return Err(Error::Contract(format!("cost is not symmetric: {a} vs {b}")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TransportMethod {
    ExactLp,
    Hungarian,
    Sinkhorn { epsilon: f64 },
}

/// A coupling with its (unregularised) total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    coupling: Vec<f64>,
    pub cost: f64,
    pub method: TransportMethod,
    /// Kantorovich potentials `(f, g)` with `f_i + g_j ≤ c_ij`, when the
    /// solver produces them.
    pub duals: Option<(Vec<f64>, Vec<f64>)>,
    /// L¹ error of the marginals.
    pub marginal_error: f64,
}

impl TransportPlan {
    fn from_dense(coupling: Vec<f64>, cost: &CostMatrix, a: &[f64], b: &[f64], method: TransportMethod) -> Self {
        let (rows, cols) = (cost.rows, cost.cols);
        let total = coupling.iter().zip(&cost.data).map(|(p, c)| p * c).sum();
        let mut err = 0.0;
        for i in 0..rows {
            err += (coupling[i * cols..(i + 1) * cols].iter().sum::<f64>() - a[i]).abs();
        }
        for j in 0..cols {
            err += ((0..rows).map(|i| coupling[i * cols + j]).sum::<f64>() - b[j]).abs();
        }
        Self { rows, cols, coupling, cost: total, method, duals: None, marginal_error: err }
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.cols + j]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Dual objective `Σ a_i f_i + Σ b_j g_j`, if potentials are available.
    pub fn dual_value(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        self.duals.as_ref().map(|(f, g)| {
            f.iter().zip(a).map(|(x, y)| x * y).sum::<f64>() + g.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
        })
    }

    /// Writes nonzero entries as `i,j,mass` rows.
    pub fn write_triplets_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["i", "j", "mass"])?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let m = self.coupling(i, j);
                if m > 0.0 {
                    wtr.write_record([i.to_string(), j.to_string(), format!("{m:e}")])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_problem(a: &[f64], b: &[f64], cost: &CostMatrix) -> Result<()> {
    if a.len() != cost.rows || b.len() != cost.cols {
        return shape("weights do not match the cost matrix");
    }
    check_weights(a)?;
    check_weights(b)
}

/// Exact `W_c` between the two measures, evaluating `cost` on all pairs.
pub fn wc_exact<T: Sync, U: Sync>(
    mu: &EmpiricalMeasure<T>,
    nu: &EmpiricalMeasure<U>,
    cost: impl Fn(&T, &U) -> f64 + Sync,
) -> Result<TransportPlan> {
    let c = CostMatrix::from_oracle(mu.samples(), nu.samples(), cost)?;
    if mu.len() == nu.len() && mu.is_uniform() && nu.is_uniform() {
        hungarian(&c)
    } else {
        exact_lp(mu.weights(), nu.weights(), &c)
    }
}

/// Optimal assignment for a square cost matrix (uniform equal-size
/// measures), `O(n³)` shortest augmenting paths with potentials.
pub fn hungarian(cost: &CostMatrix) -> Result<TransportPlan> {
    let n = cost.rows;
    if cost.cols != n {
        return shape("assignment needs a square cost matrix");
    }
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let w = 1.0 / n as f64;
    let mut coupling = vec![0.0; n * n];
    for j in 1..=n {
        coupling[(owner[j] - 1) * n + (j - 1)] = w;
    }
    let uniform = vec![w; n];
    let mut plan = TransportPlan::from_dense(coupling, cost, &uniform, &uniform, TransportMethod::Hungarian);
    plan.duals = Some((u[1..].to_vec(), v[1..].to_vec()));
    Ok(plan)
}

/// Exact transportation LP by successive shortest paths with node
/// potentials (a primal–dual network-flow method); returns optimal duals.
pub fn exact_lp(a: &[f64], b: &[f64], cost: &CostMatrix) -> Result<TransportPlan> {
    check_problem(a, b, cost)?;
    let (n, m) = (cost.rows, cost.cols);
    let tiny = 1e-15;
    let mut flow = vec![0.0; n * m];
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    // Node potentials: sources 0..n, sinks n..n+m. Reduced cost of i→j is
    // c_ij + π_i − π_j ≥ 0; reverse arcs j→i carry −c_ij + π_j − π_i = 0.
    let mut pi = vec![0.0; n + m];
    for j in 0..m {
        pi[n + j] = (0..n).map(|i| cost.get(i, j)).fold(f64::INFINITY, f64::min);
    }
    let mut dist = vec![0.0; n + m];
    let mut pred = vec![usize::MAX; n + m];
    let mut done = vec![false; n + m];
    let max_rounds = 10 * (n + m) * (n + m) + 100;
    let mut rounds = 0;
    while supply.iter().any(|&s| s > tiny) && demand.iter().any(|&d| d > tiny) {
        rounds += 1;
        if rounds > max_rounds {
            let residual = supply.iter().sum::<f64>();
            return Err(Error::Convergence { iterations: rounds, residual });
        }
        dist.fill(f64::INFINITY);
        pred.fill(usize::MAX);
        done.fill(false);
        for i in 0..n {
            if supply[i] > tiny {
                dist[i] = 0.0;
            }
        }
        let mut target = None;
        loop {
            let mut best = f64::INFINITY;
            let mut node = usize::MAX;
            for (k, &d) in dist.iter().enumerate() {
                if !done[k] && d < best {
                    best = d;
                    node = k;
                }
            }
            if node == usize::MAX {
                break;
            }
            done[node] = true;
            if node >= n {
                let j = node - n;
                if demand[j] > tiny {
                    target = Some(node);
                    break;
                }
                for i in 0..n {
                    if flow[i * m + j] > tiny && !done[i] {
                        let nd = best + (pi[node] - pi[i] - cost.get(i, j)).max(0.0);
                        if nd < dist[i] {
                            dist[i] = nd;
                            pred[i] = node;
                        }
                    }
                }
            } else {
                let row = cost.row(node);
                for j in 0..m {
                    if !done[n + j] {
                        let nd = best + (row[j] + pi[node] - pi[n + j]).max(0.0);
                        if nd < dist[n + j] {
                            dist[n + j] = nd;
                            pred[n + j] = node;
                        }
                    }
                }
            }
        }
        let Some(sink) = target else {
            return Err(Error::Contract("transport problem is infeasible".into()));
        };
        let reach = dist[sink];
        for k in 0..n + m {
            pi[k] += dist[k].min(reach);
        }
        let mut amount = demand[sink - n];
        let mut node = sink;
        while pred[node] != usize::MAX {
            let p = pred[node];
            if node < n {
                amount = amount.min(flow[node * m + (p - n)]);
            }
            node = p;
        }
        amount = amount.min(supply[node]);
        supply[node] -= amount;
        demand[sink - n] -= amount;
        let mut node = sink;
        while pred[node] != usize::MAX {
            let p = pred[node];
            if node >= n {
                flow[p * m + (node - n)] += amount;
            } else {
                flow[node * m + (p - n)] -= amount;
            }
            node = p;
        }
    }
    for f in flow.iter_mut() {
        if *f < tiny {
            *f = 0.0;
        }
    }
    let mut plan = TransportPlan::from_dense(flow, cost, a, b, TransportMethod::ExactLp);
    plan.duals = Some((pi[..n].iter().map(|p| -p).collect(), pi[n..].to_vec()));
    Ok(plan)
}

const SINKHORN_TOL: f64 = 1e-8;
const SINKHORN_MAX_ITER: usize = 10_000;
/// Intermediate ε-scaling stages stop at this marginal error.
const STAGE_TOL: f64 = 1e-6;
const STAGE_MAX_ITER: usize = 300;
const STAGE_FACTOR: f64 = 0.5;
/// Plain scaling sweeps at the target ε before switching to Newton steps.
const NEWTON_AFTER: usize = 100;

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + it.map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// Log-domain entropic problem; the plan is
/// `π_ij = a_i b_j exp((f_i + g_j − c_ij)/ε)`.
struct Entropic<'a> {
    cost: &'a CostMatrix,
    a: &'a [f64],
    b: &'a [f64],
    la: Vec<f64>,
    lb: Vec<f64>,
}

impl Entropic<'_> {
    fn sweep(&self, f: &mut [f64], g: &mut [f64], eps: f64) {
        let (n, m) = (self.cost.rows, self.cost.cols);
        for i in 0..n {
            let row = self.cost.row(i);
            f[i] = -eps * log_sum_exp((0..m).map(|j| self.lb[j] + (g[j] - row[j]) / eps));
        }
        for j in 0..m {
            g[j] = -eps * log_sum_exp((0..n).map(|i| self.la[i] + (f[i] - self.cost.get(i, j)) / eps));
        }
    }

    fn plan(&self, f: &[f64], g: &[f64], eps: f64, out: &mut [f64]) {
        let m = self.cost.cols;
        for (i, row) in out.chunks_mut(m).enumerate() {
            let c = self.cost.row(i);
            for j in 0..m {
                row[j] = (self.la[i] + self.lb[j] + (f[i] + g[j] - c[j]) / eps).exp();
            }
        }
    }

    /// Marginals of a plan.
    fn marginals(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (n, m) = (self.cost.rows, self.cost.cols);
        let mut r = vec![0.0; n];
        let mut c = vec![0.0; m];
        for i in 0..n {
            for j in 0..m {
                r[i] += p[i * m + j];
                c[j] += p[i * m + j];
            }
        }
        (r, c)
    }

    fn error(&self, p: &[f64]) -> f64 {
        let (r, c) = self.marginals(p);
        r.iter().zip(self.a).map(|(x, y)| (x - y).abs()).sum::<f64>()
            + c.iter().zip(self.b).map(|(x, y)| (x - y).abs()).sum::<f64>()
    }

    /// Concave dual objective `Σ a f + Σ b g − ε Σ π`.
    fn dual(&self, f: &[f64], g: &[f64], eps: f64, scratch: &mut [f64]) -> f64 {
        self.plan(f, g, eps, scratch);
        f.iter().zip(self.a).map(|(x, y)| x * y).sum::<f64>() + g.iter().zip(self.b).map(|(x, y)| x * y).sum::<f64>()
            - eps * scratch.iter().sum::<f64>()
    }

    /// One damped Newton ascent step on the dual; the Hessian system is
    /// solved by Jacobi-preconditioned conjugate gradients.
    fn newton_step(&self, f: &mut [f64], g: &mut [f64], eps: f64, p: &mut [f64]) {
        let (n, m) = (self.cost.rows, self.cost.cols);
        self.plan(f, g, eps, p);
        let (r, c) = self.marginals(p);
        let rhs: Vec<f64> = (0..n).map(|i| self.a[i] - r[i]).chain((0..m).map(|j| self.b[j] - c[j])).collect();
        let diag: Vec<f64> = r.iter().chain(&c).map(|x| (x / eps).max(1e-300)).collect();
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let row = &p[i * m..(i + 1) * m];
                out[i] = (r[i] * x[i] + row.iter().zip(&x[n..]).map(|(a, b)| a * b).sum::<f64>()) / eps;
            }
            for j in 0..m {
                out[n + j] = (c[j] * x[n + j] + (0..n).map(|i| p[i * m + j] * x[i]).sum::<f64>()) / eps;
            }
        };
        let dim = n + m;
        let mut x = vec![0.0; dim];
        let mut res = rhs.clone();
        let mut z: Vec<f64> = res.iter().zip(&diag).map(|(a, b)| a / b).collect();
        let mut dir = z.clone();
        let mut rz: f64 = res.iter().zip(&z).map(|(a, b)| a * b).sum();
        let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut hd = vec![0.0; dim];
        for _ in 0..2 * dim {
            apply(&dir, &mut hd);
            let curv: f64 = dir.iter().zip(&hd).map(|(a, b)| a * b).sum();
            if !(curv > 0.0) {
                break;
            }
            let step = rz / curv;
            for k in 0..dim {
                x[k] += step * dir[k];
                res[k] -= step * hd[k];
            }
            if res.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-12 * rhs_norm {
                break;
            }
            for k in 0..dim {
                z[k] = res[k] / diag[k];
            }
            let rz_next: f64 = res.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_next / rz;
            rz = rz_next;
            for k in 0..dim {
                dir[k] = z[k] + beta * dir[k];
            }
        }
        let slope: f64 = rhs.iter().zip(&x).map(|(a, b)| a * b).sum();
        let base = self.dual(f, g, eps, p);
        let mut t = 1.0;
        let (mut tf, mut tg) = (f.to_vec(), g.to_vec());
        while t > 1e-10 {
            for i in 0..n {
                tf[i] = f[i] + t * x[i];
            }
            for j in 0..m {
                tg[j] = g[j] + t * x[n + j];
            }
            if self.dual(&tf, &tg, eps, p) >= base + 1e-4 * t * slope {
                f.copy_from_slice(&tf);
                g.copy_from_slice(&tg);
                return;
            }
            t *= 0.5;
        }
    }
}

/// Entropic OT in the log domain with ε-scaling; returns the unregularised
/// cost of the regularised plan, an upper bound of `W_c`.
///
/// Scaling sweeps run on a decreasing ε schedule; at the target ε they are
/// followed by Newton steps on the dual, since plain sweeps converge very
/// slowly once ε is a small fraction of the typical cost. Every sweep or
/// Newton step counts towards the iteration cap.
pub fn wc_sinkhorn(a: &[f64], b: &[f64], cost: &CostMatrix, epsilon: f64) -> Result<TransportPlan> {
    check_problem(a, b, cost)?;
    if !(epsilon > 0.0) {
        return Err(Error::Domain("regularisation must be positive".into()));
    }
    if a.iter().chain(b).any(|&w| w <= 0.0) {
        return Err(Error::Contract("entropic transport needs strictly positive weights".into()));
    }
    let (n, m) = (cost.rows, cost.cols);
    let prob = Entropic { cost, a, b, la: a.iter().map(|x| x.ln()).collect(), lb: b.iter().map(|x| x.ln()).collect() };
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut p = vec![0.0; n * m];
    let mut eps = cost.max().max(epsilon);
    let mut iterations = 0;
    while eps > epsilon {
        for _ in 0..STAGE_MAX_ITER {
            iterations += 1;
            prob.sweep(&mut f, &mut g, eps);
            prob.plan(&f, &g, eps, &mut p);
            if prob.error(&p) < STAGE_TOL {
                break;
            }
        }
        eps = (eps * STAGE_FACTOR).max(epsilon);
    }
    let mut err = f64::INFINITY;
    let mut final_iterations = 0;
    while final_iterations < SINKHORN_MAX_ITER {
        final_iterations += 1;
        if final_iterations <= NEWTON_AFTER {
            prob.sweep(&mut f, &mut g, eps);
        } else {
            prob.newton_step(&mut f, &mut g, eps, &mut p);
        }
        prob.plan(&f, &g, eps, &mut p);
        err = prob.error(&p);
        if err < SINKHORN_TOL {
            break;
        }
    }
    iterations += final_iterations;
    if !(err < SINKHORN_TOL) {
        return Err(Error::Convergence { iterations, residual: err });
    }
    let mut plan = TransportPlan::from_dense(p, cost, a, b, TransportMethod::Sinkhorn { epsilon });
    plan.duals = Some((f, g));
    Ok(plan)
}

/// `(1/n) Σ c(Ψ(ω_i), Ψ(ω_i + h))` for a batch paired by common noise.
pub fn synchronous_cost<T>(base: &[T], shifted: &[T], cost: impl Fn(&T, &T) -> f64) -> Result<f64> {
    Ok(crate::stats::mean(&synchronous_costs(base, shifted, cost)?))
}

/// Per-sample costs of the synchronous coupling.
pub fn synchronous_costs<T>(base: &[T], shifted: &[T], cost: impl Fn(&T, &T) -> f64) -> Result<Vec<f64>> {
    if base.len() != shifted.len() || base.is_empty() {
        return Err(Error::Contract("synchronous coupling needs a nonempty paired batch".into()));
    }
    let out: Vec<f64> = base.iter().zip(shifted).map(|(x, y)| cost(x, y)).collect();
    if out.iter().any(|c| !c.is_finite()) {
        return Err(Error::Evaluation("synchronous cost is not finite".into()));
    }
    Ok(out)
}

/// Relative entropy of the law shifted by `h` with respect to the Gaussian
/// law itself, `‖h‖²/2`.
pub fn entropy_shift(h: &CameronMartinShift) -> f64 {
    0.5 * h.norm_sq()
}

/// `P_c g(y_j) = max_i { g(x_i) − c(x_i, y_j) }` over the cloud.
pub fn inf_convolution(g: &[f64], cost: &CostMatrix) -> Result<Vec<f64>> {
    if g.len() != cost.rows {
        return shape("one function value per cloud point required");
    }
    Ok((0..cost.cols)
        .map(|j| (0..cost.rows).map(|i| g[i] - cost.get(i, j)).fold(f64::NEG_INFINITY, f64::max))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_cost(xs: &[f64], ys: &[f64]) -> CostMatrix {
        CostMatrix::from_oracle(xs, ys, |x, y| (x - y).abs()).unwrap()
    }

    #[test]
    fn dirac_and_identity() {
        let c = line_cost(&[0.0], &[2.5]);
        assert_eq!(exact_lp(&[1.0], &[1.0], &c).unwrap().cost, 2.5);
        let xs = [0.1, 0.7, -1.0];
        let plan = hungarian(&line_cost(&xs, &xs)).unwrap();
        assert_eq!(plan.cost, 0.0);
        for i in 0..3 {
            assert!((plan.coupling(i, i) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn lp_matches_hungarian_and_dual() {
        let xs = [0.3, -1.2, 2.0, 0.9, 1.4];
        let ys = [1.0, 0.0, -0.4, 2.2, 0.5];
        let c = CostMatrix::from_oracle(&xs, &ys, |x, y| (x - y) * (x - y)).unwrap();
        let w = vec![0.2; 5];
        let lp = exact_lp(&w, &w, &c).unwrap();
        let hu = hungarian(&c).unwrap();
        assert!((lp.cost - hu.cost).abs() < 1e-12);
        assert!((lp.dual_value(&w, &w).unwrap() - lp.cost).abs() < 1e-12);
        assert!(lp.marginal_error < 1e-12);
    }

    #[test]
    fn unequal_weights() {
        let c = line_cost(&[0.0, 1.0], &[0.0, 1.0, 2.0]);
        let plan = exact_lp(&[0.5, 0.5], &[0.25, 0.25, 0.5], &c).unwrap();
        // Mass 0.25 at 0 stays, 0.25 moves 0→1, 0.5 moves 1→2.
        assert!((plan.cost - 0.75).abs() < 1e-12);
        assert!(plan.marginal_error < 1e-12);
        assert!((plan.dual_value(&[0.5, 0.5], &[0.25, 0.25, 0.5]).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn sinkhorn_upper_bounds_exact() {
        use crate::rng::{normals, stream_rng};
        for seed in 0..5 {
            let mut rng = stream_rng(seed, 0);
            let xs: Vec<[f64; 2]> = (0..64).map(|_| [normals(&mut rng, 1)[0], normals(&mut rng, 1)[0]]).collect();
            let ys: Vec<[f64; 2]> = (0..64).map(|_| [1.0 + normals(&mut rng, 1)[0], normals(&mut rng, 1)[0]]).collect();
            let c = CostMatrix::from_oracle(&xs, &ys, |x, y| ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt()).unwrap();
            let w = vec![1.0 / 64.0; 64];
            let exact = hungarian(&c).unwrap().cost;
            let sk = wc_sinkhorn(&w, &w, &c, 1e-3 * c.median()).unwrap();
            assert!(sk.cost >= exact - 1e-9 && sk.cost < exact * 1.02);
        }
    }

    #[test]
    fn inf_convolution_on_the_line() {
        let xs = [0.0, 1.0, 4.0];
        let c = CostMatrix::from_oracle(&xs, &xs, |x: &f64, y: &f64| (x - y).abs().sqrt()).unwrap();
        let p = inf_convolution(&[0.0, 2.0, 1.0], &c).unwrap();
        assert_eq!(p, vec![1.0, 2.0, 1.0f64.max(2.0 - 3f64.sqrt())]);
        assert!(inf_convolution(&[0.0; 3], &c).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CostMatrix::new(1, 1, vec![f64::NAN]).is_err());
        let c = line_cost(&[0.0], &[1.0]);
        assert!(matches!(exact_lp(&[0.7], &[1.0], &c), Err(Error::Contract(_))));
        assert!(synchronous_cost(&[1.0], &[], |a: &f64, b: &f64| a - b).is_err());
    }
}
