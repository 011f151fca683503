//! Experiment configuration: TOML schema, presets and overrides.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Lift,
    SolveRde,
    Model,
    Tci,
    Tails,
    Deviations,
    Pam,
    Wlsi,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Lift => "lift",
            Self::SolveRde => "solve-rde",
            Self::Model => "model",
            Self::Tci => "tci",
            Self::Tails => "tails",
            Self::Deviations => "deviations",
            Self::Pam => "pam",
            Self::Wlsi => "wlsi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub driver: Option<DriverBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<FunctionalBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation: Option<DeviationBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pam: Option<PamBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wlsi: Option<WlsiBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    #[serde(default = "default_n")]
    pub n: usize,
    /// Cloud size for exact optimal transport in `tci`.
    #[serde(default)]
    pub n_ot: usize,
}

fn default_n() -> usize {
    100
}

impl Default for Sampling {
    fn default() -> Self {
        Self { n: default_n(), n_ot: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriverName {
    Bm,
    Fbm,
    Rl,
    Ou,
    Bridge,
}

impl std::str::FromStr for DriverName {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bm" => Self::Bm,
            "fbm" => Self::Fbm,
            "rl" => Self::Rl,
            "ou" => Self::Ou,
            "bridge" => Self::Bridge,
            other => bail!("unknown driver `{other}` (expected bm, fbm, rl, ou or bridge)"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverBlock {
    pub kind: DriverName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "unit")]
    pub horizon: f64,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

fn default_steps() -> usize {
    64
}

impl DriverBlock {
    pub fn new(kind: DriverName) -> Self {
        Self { kind, hurst: None, theta: None, sigma: None, dim: 1, steps: default_steps(), horizon: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldName {
    /// Rotations of `ℝ³` about the first two axes, driven by a 2-d path.
    Rotation,
    /// `dY = a Y dX` for a scalar driver.
    Scalar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionalBlock {
    Identity,
    Lift {
        p: f64,
    },
    Rde {
        p: f64,
        q: f64,
        field: FieldName,
        #[serde(default = "unit")]
        scale: f64,
    },
    ItoModel {
        hurst: f64,
        kappa: f64,
        #[serde(default = "default_j0")]
        j0: i32,
        #[serde(default = "default_j1")]
        j1: i32,
    },
    LogPrice {
        hurst: f64,
        coeffs: Vec<f64>,
        gamma: f64,
    },
}

fn default_j0() -> i32 {
    1
}

fn default_j1() -> i32 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostBlock {
    /// Must agree with the exponent registered for the functional.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    /// Deviation function `c (tᵃ ∧ tᵇ)` to test as stated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theoretical: Option<PowerMin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerMin {
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftProfile {
    /// Constant white-noise density, i.e. `h(t) = t`.
    Constant,
    /// Density `t`, i.e. `h(t) = t²/2`.
    Ramp,
    /// Density `cos(πt)`.
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftBlock {
    #[serde(default = "default_profile")]
    pub profile: ShiftProfile,
    #[serde(default = "unit")]
    pub amplitude: f64,
    pub t_grid: Vec<f64>,
}

fn default_profile() -> ShiftProfile {
    ShiftProfile::Constant
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    /// Davie steps per driver cell.
    #[serde(default = "one")]
    pub substeps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    /// `|G|²` for a standard Gaussian vector of dimension `dim`.
    GaussianSquare,
    /// p-variation norm of the functional output.
    Norm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationBlock {
    pub statistic: Statistic,
    #[serde(default = "default_gaussian_dim")]
    pub dim: usize,
    pub batch_sizes: Vec<usize>,
    pub levels: Vec<f64>,
    pub replications: usize,
    pub power: f64,
    pub threshold: f64,
}

fn default_gaussian_dim() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PamMode {
    Solve,
    Cauchy,
    Tails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PamBlock {
    pub mode: PamMode,
    pub k: usize,
    pub epsilons: Vec<f64>,
    pub t: f64,
    pub dt: f64,
    #[serde(default)]
    pub realisations: usize,
    /// Lattice constant of the renormalisation; computed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WlsiExample {
    Polynomial,
    Triple,
    Rde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WlsiBlock {
    pub example: WlsiExample,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub powers: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default = "default_p_grid")]
    pub p_grid: Vec<f64>,
    /// Sample size for the moment check, which needs more than the rest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_n: Option<usize>,
}

fn default_p_grid() -> Vec<f64> {
    vec![2.0, 4.0]
}

/// Presets shipped with the binary.
pub const PRESETS: &[(&str, &str)] = &[
    ("lift-chen", include_str!("../presets/lift-chen.toml")),
    ("simulate-rl", include_str!("../presets/simulate-rl.toml")),
    ("identity-talagrand", include_str!("../presets/identity-talagrand.toml")),
    ("model-shifts-h025", include_str!("../presets/model-shifts-h025.toml")),
    ("rde-fbm-h04", include_str!("../presets/rde-fbm-h04.toml")),
    ("tails-rde-fbm-h04", include_str!("../presets/tails-rde-fbm-h04.toml")),
    ("deviations-gaussian", include_str!("../presets/deviations-gaussian.toml")),
    ("log-price-r2", include_str!("../presets/log-price-r2.toml")),
    ("pam-cauchy", include_str!("../presets/pam-cauchy.toml")),
    ("pam-tails", include_str!("../presets/pam-tails.toml")),
    ("wlsi-polynomial", include_str!("../presets/wlsi-polynomial.toml")),
];

pub fn preset(name: &str) -> Result<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        anyhow!("unknown preset `{name}`; available: {}", names.join(", "))
    })
}

/// Parses a configuration or a MANIFEST written by a previous run (whose
/// `[experiment]` table holds the resolved configuration).
pub fn parse(text: &str, origin: &str) -> Result<ExperimentConfig> {
    let table: toml::Table = toml::from_str(text).with_context(|| format!("{origin}: invalid TOML"))?;
    if table.contains_key("manifest") {
        let exp = table
            .get("experiment")
            .cloned()
            .ok_or_else(|| anyhow!("{origin}: manifest without an [experiment] table"))?;
        return exp.try_into().with_context(|| format!("{origin}: invalid [experiment] table"));
    }
    toml::from_str(text).with_context(|| format!("{origin}: schema violation"))
}

impl ExperimentConfig {
    pub fn defaults(command: Command) -> Self {
        Self {
            command,
            seed: 0,
            output_dir: None,
            sampling: Sampling::default(),
            driver: None,
            functional: None,
            cost: None,
            shift: None,
            solver: None,
            deviation: None,
            pam: None,
            wlsi: None,
        }
    }

    /// Hash of everything that determines the results; the output
    /// directory is excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let json = serde_json::to_string(&c).expect("configuration serialises");
        hex::encode(Sha256::digest(json.as_bytes()))[..12].to_string()
    }

    pub fn stem(&self) -> String {
        format!("{}-{}-{}", self.command.name(), self.seed, self.hash())
    }
}
