use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Deviation function `α` of a transportation-cost inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum DeviationFunction {
    /// `t ↦ C (tᵃ ∧ tᵇ)`.
    PowerMin { c: f64, a: f64, b: f64 },
    /// `t ↦ C t^{2/p}`.
    Talagrand { c: f64, p: f64 },
}

impl DeviationFunction {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::PowerMin { c, a, b } => c >= 0.0 && a > 0.0 && b > 0.0,
            Self::Talagrand { c, p } => c >= 0.0 && p > 0.0,
        };
        if ok {
            Ok(())
        } else {
            domain(format!("{self:?} is not a deviation function"))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match *self {
            Self::PowerMin { c, a, b } => c * t.powf(a).min(t.powf(b)),
            Self::Talagrand { c, p } => c * t.powf(2.0 / p),
        }
    }

    /// Shape with unit constant.
    pub fn shape(&self, t: f64) -> f64 {
        self.with_constant(1.0).eval(t)
    }

    pub fn constant(&self) -> f64 {
        match *self {
            Self::PowerMin { c, .. } | Self::Talagrand { c, .. } => c,
        }
    }

    pub fn with_constant(&self, c: f64) -> Self {
        match *self {
            Self::PowerMin { a, b, .. } => Self::PowerMin { c, a, b },
            Self::Talagrand { p, .. } => Self::Talagrand { c, p },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let f = DeviationFunction::PowerMin { c: 2.0, a: 2.0, b: 6.0 };
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(0.5), 2.0 * 0.5f64.powi(6));
        assert_eq!(f.eval(2.0), 8.0);
        let g = DeviationFunction::Talagrand { c: 0.25, p: 1.0 };
        assert_eq!(g.eval(2.0), 1.0);
        let mut last = 0.0;
        for k in 0..100 {
            let v = f.eval(k as f64 * 0.05);
            assert!(v >= last);
            last = v;
        }
    }
}
