//! Monte Carlo checks of transportation-cost inequalities restricted to
//! Cameron–Martin shift families, exponential moments, deviation bounds and
//! tail shapes.
//!
//! Every TCI check here quantifies only over translates `ν = μ(· − h)`,
//! whose relative entropy `‖h‖²/2` is exact; the full inequality over all
//! `ν` is not certified.

mod deviation;
mod experiment;
pub mod functionals;
mod moments;
mod tails;

pub use deviation::DeviationFunction;
pub use experiment::{
    run_tci_experiment, shift_exponent_regression, ShiftRegression, ShiftRow, ShiftableFunctional, TciConfig,
    TciReport,
};
pub use moments::{
    check_deviation, check_exp_moments, gaussian_moment_check, DeviationPoint, DeviationReport, ExpMomentPoint,
    ExpMomentReport, ExponentFit, GaussianMomentReport, MIN_ESS,
};
pub use tails::{fit_tail, LognormalFit, TailFit, MIN_EXCEEDANCES};
