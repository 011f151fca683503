use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Strictly increasing time points `0 = t_0 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return domain(format!("horizon must be positive, got {horizon}"));
        }
        if steps == 0 {
            return domain("a grid needs at least one step");
        }
        let dt = horizon / steps as f64;
        let mut points: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
        points[steps] = horizon;
        Ok(Self { points })
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return domain("a grid needs at least two points");
        }
        if points[0] != 0.0 {
            return domain("grids start at t = 0");
        }
        if points.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return domain("grid points must be strictly increasing and finite");
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn horizon(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t(&self, i: usize) -> f64 {
        self.points[i]
    }

    /// Length of cell `i`, i.e. `t_{i+1} - t_i`.
    pub fn dt(&self, i: usize) -> f64 {
        self.points[i + 1] - self.points[i]
    }

    pub fn is_uniform(&self) -> bool {
        let h = self.dt(0);
        (0..self.steps()).all(|i| (self.dt(i) - h).abs() <= 1e-12 * h.max(1.0))
    }

    /// About `count` equispaced grid indices, both endpoints included.
    pub fn subgrid_indices(&self, count: usize) -> Vec<usize> {
        let n = self.steps();
        let count = count.clamp(2, n + 1);
        let mut idx: Vec<usize> = (0..count)
            .map(|k| ((k as f64) * n as f64 / (count - 1) as f64).round() as usize)
            .collect();
        idx.dedup();
        idx
    }
}
