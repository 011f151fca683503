//! Rough-volatility Itô models `(Π, Γ)` built from a Brownian motion and its
//! Riemann–Liouville transform, their Cameron–Martin translations and
//! metrics, the driftless log-price and modelled distributions.

mod distance;
mod log_price;
mod model;
mod modelled;
mod symbols;

pub use distance::{
    gamma_distance, model_distance, model_distance_with_gamma, scaling_exponents, ModelPairings, ScalingFit,
    TestFunctionFamily, ThreebarReport,
};
pub use log_price::{exp_price, holder_seminorm, log_price, log_price_from_model, VolatilityFunction};
pub use model::{Anchors, BrownianNoise, ItoModel};
pub use modelled::{dgamma_distance, dgamma_norm, flat_metric, lift_modelled_distribution, ModelledDistribution};
pub use symbols::{choose_m, Symbol, SymbolSet};

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
