//! Dense lower-triangular helpers on row-major `Vec<f64>` storage.

use crate::error::{Error, Result};

/// Lower Cholesky factor `L` with `L Lᵀ = A + jitter·I`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
    jitter: f64,
}

impl Cholesky {
    /// Factorises a symmetric matrix, escalating a diagonal jitter
    /// `λ·trace/n` with `λ = 1e-14, 1e-13, ..., 1e-10` on failure.
    pub fn factor(a: &[f64], n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix storage does not match n");
        if let Some(lower) = try_factor(a, n, 0.0) {
            return Ok(Self { n, lower, jitter: 0.0 });
        }
        let mean_diag = (0..n).map(|i| a[i * n + i]).sum::<f64>() / n as f64;
        let mut last = 0.0;
        for exp in [-14, -13, -12, -11, -10] {
            let jitter = 10f64.powi(exp) * mean_diag;
            last = jitter;
            if let Some(lower) = try_factor(a, n, jitter) {
                return Ok(Self { n, lower, jitter });
            }
        }
        Err(Error::Covariance { jitter: last })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.n + j]
    }

    /// `out = L z`.
    pub fn mul(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i + 1];
            out[i] = row.iter().zip(&z[..=i]).map(|(l, z)| l * z).sum();
        }
    }

    /// Solves `L x = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, x)| l * x).sum();
            x[i] = (b[i] - s) / self.lower[i * n + i];
        }
        x
    }
}

fn try_factor(a: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j] + jitter;
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Some(l)
}
