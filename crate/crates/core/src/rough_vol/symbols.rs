use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Tolerance used when comparing symbol degrees with zero.
const DEGREE_TOL: f64 = 1e-12;

/// Basis symbols of the rough-volatility structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    One,
    /// The noise `Ξ`.
    Xi,
    /// `I(Ξ)^m`, `m ≥ 1`.
    Lift(usize),
    /// `Ξ I(Ξ)^m`, `m ≥ 1`.
    XiLift(usize),
}

impl std::fmt::Display for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Symbol::One => write!(f, "1"),
            Symbol::Xi => write!(f, "Xi"),
            Symbol::Lift(m) => write!(f, "I(Xi)^{m}"),
            Symbol::XiLift(m) => write!(f, "Xi I(Xi)^{m}"),
        }
    }
}

/// Largest `m` with `m(H−κ) − ½ − κ ≤ 0`.
pub fn choose_m(hurst: f64, kappa: f64) -> Result<usize> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return domain(format!("Hurst parameter must lie in (0,1), got {hurst}"));
    }
    if !(kappa > 0.0 && kappa < hurst) {
        return domain(format!("kappa must lie in (0, H), got {kappa}"));
    }
    let step = hurst - kappa;
    let excess = |m: usize| m as f64 * step - 0.5 - kappa;
    let mut m = ((0.5 + kappa) / step).floor() as usize;
    while excess(m + 1) <= DEGREE_TOL {
        m += 1;
    }
    while m > 0 && excess(m) > DEGREE_TOL {
        m -= 1;
    }
    Ok(m)
}

/// Symbols and degrees for given `(H, κ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolSet {
    pub hurst: f64,
    pub kappa: f64,
    pub m: usize,
}

impl SymbolSet {
    pub fn new(hurst: f64, kappa: f64) -> Result<Self> {
        Ok(Self { hurst, kappa, m: choose_m(hurst, kappa)? })
    }

    pub fn degree(&self, s: Symbol) -> f64 {
        let step = self.hurst - self.kappa;
        match s {
            Symbol::One => 0.0,
            Symbol::Xi => -0.5 - self.kappa,
            Symbol::Lift(m) => m as f64 * step,
            Symbol::XiLift(m) => m as f64 * step - 0.5 - self.kappa,
        }
    }

    /// All non-unit symbols: `Ξ`, `I(Ξ)^m`, `ΞI(Ξ)^m` for `m = 1..=M`.
    pub fn symbols(&self) -> Vec<Symbol> {
        let mut v = vec![Symbol::Xi];
        v.extend((1..=self.m).map(Symbol::Lift));
        v.extend((1..=self.m).map(Symbol::XiLift));
        v
    }

    /// Supremum of admissible orders for modelled distributions.
    pub fn max_gamma(&self) -> f64 {
        let step = self.hurst - self.kappa;
        ((self.m + 1) as f64 * step - 0.5 - self.kappa).min(0.5 - self.kappa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(choose_m(0.5, 1e-6).unwrap(), 1);
        assert_eq!(choose_m(0.25, 1e-6).unwrap(), 2);
        assert_eq!(choose_m(0.1, 0.05).unwrap(), 11);
        assert_eq!(choose_m(0.25, 0.02).unwrap(), 2);
        assert!(choose_m(0.2, 0.2).is_err());
        assert!(choose_m(0.2, 0.0).is_err());
    }

    #[test]
    fn next_degree_is_positive() {
        let s = SymbolSet::new(0.3, 0.01).unwrap();
        assert!(s.degree(Symbol::XiLift(s.m + 1)) > 0.0);
        assert!(s.degree(Symbol::XiLift(s.m)) <= 0.0);
        assert_eq!(s.symbols().len(), 2 * s.m + 1);
    }
}
