//! Numerical laboratory for concentration of measure on Gaussian
//! functionals: rough paths and RDEs, rough-volatility models, the
//! renormalised parabolic Anderson model, transportation-cost and weighted
//! log-Sobolev checks.

pub mod error;
pub mod gauss_sim;
pub mod grid;
pub mod linalg;
pub mod pam;
pub mod path;
pub mod quad;
pub mod rde;
pub mod rng;
pub mod rough_path;
pub mod rough_vol;
pub mod stats;
pub mod tci;
pub mod transport;
pub mod wlsi;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use path::Path;
