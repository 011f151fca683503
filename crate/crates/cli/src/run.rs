//! Executes a resolved configuration and collects its artifacts in memory.

use std::fmt::Display;

use anyhow::anyhow;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use tcilab::gauss_sim::{CameronMartinShift, DriverKind, DriverSpec, GaussianSampler};
use tcilab::pam::{cauchy_study, lattice_c0, pam_tail_study, solve_pam, MollifiedNoise, PamTailConfig, TorusField};
use tcilab::path::Container;
use tcilab::rde::{solve_rde_refined, VectorFieldSpec};
use tcilab::rng::stream_rng;
use tcilab::rough_path::{chen_combine, lift_piecewise_linear, p_var_norm, path_p_var};
use tcilab::rough_vol::{scaling_exponents, Anchors, BrownianNoise, ItoModel, TestFunctionFamily, VolatilityFunction};
use tcilab::stats::{mean, median};
use tcilab::tci::functionals::{ItoModelFunctional, LogPriceFunctional, RdeFunctional, RoughPathLift, WhiteNoiseIdentity};
use tcilab::tci::{
    check_deviation, fit_tail, run_tci_experiment, shift_exponent_regression, DeviationFunction,
    TciConfig,
};
use tcilab::wlsi::{
    check_gradient_bound, check_marginal_wlsi, check_moment_consequence, check_wlsi, standard_family, FunctionalKind,
    FunctionalSpec,
};
use tcilab::{Path, TimeGrid};

use crate::config::*;

/// Tolerance on the fitted RDE tail exponent reported by `tails`.
const RDE_THETA_TOLERANCE: f64 = 0.35;
const RDE_MIN_R_SQUARED: f64 = 0.95;

#[derive(Debug)]
pub enum RunError {
    /// The configuration is inconsistent or out of range.
    Config(anyhow::Error),
    /// A numerical routine failed on a valid configuration.
    Numerical(anyhow::Error),
}

type Result<T> = std::result::Result<T, RunError>;

fn invalid(msg: impl Display) -> RunError {
    RunError::Config(anyhow!("{msg}"))
}

trait Phase<T> {
    /// Errors while building objects from the configuration.
    fn setup(self, what: &str) -> Result<T>;
    /// Errors while computing.
    fn compute(self, what: &str) -> Result<T>;
}

impl<T> Phase<T> for tcilab::Result<T> {
    fn setup(self, what: &str) -> Result<T> {
        self.map_err(|e| RunError::Config(anyhow!("{what}: {e}")))
    }

    fn compute(self, what: &str) -> Result<T> {
        self.map_err(|e| RunError::Numerical(anyhow!("{what}: {e}")))
    }
}

#[derive(Debug, Default)]
pub struct Outputs {
    pub report: Value,
    pub csv: Option<Vec<u8>>,
    pub binary: Option<Vec<u8>>,
}

fn to_json(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("reports serialise")
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| RunError::Numerical(anyhow!("writing CSV: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner().map_err(|e| RunError::Numerical(anyhow!("writing CSV: {e}")))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outputs> {
    match cfg.command {
        Command::Simulate => simulate(cfg),
        Command::Lift => lift(cfg),
        Command::SolveRde => solve(cfg),
        Command::Model => model(cfg),
        Command::Tci => tci(cfg),
        Command::Tails => tails(cfg),
        Command::Deviations => deviations(cfg),
        Command::Pam => pam(cfg),
        Command::Wlsi => wlsi(cfg),
    }
}

fn driver_block(cfg: &ExperimentConfig) -> Result<&DriverBlock> {
    cfg.driver.as_ref().ok_or_else(|| invalid(format!("`{}` needs a [driver] section", cfg.command.name())))
}

fn sampler(cfg: &ExperimentConfig) -> Result<GaussianSampler> {
    let d = driver_block(cfg)?;
    let hurst = || d.hurst.ok_or_else(|| invalid("driver.hurst is required for this driver"));
    let kind = match d.kind {
        DriverName::Bm => DriverKind::BrownianMotion,
        DriverName::Fbm => DriverKind::FractionalBm { hurst: hurst()? },
        DriverName::Rl => DriverKind::RiemannLiouville { hurst: hurst()? },
        DriverName::Ou => DriverKind::OrnsteinUhlenbeck {
            theta: d.theta.ok_or_else(|| invalid("driver.theta is required for ou"))?,
            sigma: d.sigma.ok_or_else(|| invalid("driver.sigma is required for ou"))?,
        },
        DriverName::Bridge => DriverKind::BrownianBridge,
    };
    let spec = DriverSpec::new(kind, d.dim).setup("driver")?;
    let grid = TimeGrid::uniform(d.horizon, d.steps).setup("driver grid")?;
    GaussianSampler::new(spec, grid).setup("driver")
}

/// White-noise density of the profile for white-noise drivers and the
/// shift path itself otherwise.
fn shift(s: &GaussianSampler, block: &ShiftBlock) -> Result<CameronMartinShift> {
    let density = s.spec().white_noise_driven();
    let pi = std::f64::consts::PI;
    let value = |t: f64| -> f64 {
        block.amplitude
            * match (block.profile, density) {
                (ShiftProfile::Constant, true) => 1.0,
                (ShiftProfile::Constant, false) => t,
                (ShiftProfile::Ramp, true) => t,
                (ShiftProfile::Ramp, false) => 0.5 * t * t,
                (ShiftProfile::Cosine, true) => (pi * t).cos(),
                (ShiftProfile::Cosine, false) => (pi * t).sin() / pi,
            }
    };
    let dim = s.spec().dim;
    let values = s.grid().points().iter().flat_map(|&t| std::iter::repeat_n(value(t), dim)).collect();
    s.shift(values).setup("shift")
}

fn shift_block(cfg: &ExperimentConfig) -> Result<&ShiftBlock> {
    cfg.shift.as_ref().ok_or_else(|| invalid(format!("`{}` needs a [shift] section", cfg.command.name())))
}

fn substeps(cfg: &ExperimentConfig) -> Result<usize> {
    let s = cfg.solver.as_ref().map_or(1, |s| s.substeps);
    if s == 0 {
        return Err(invalid("solver.substeps must be positive"));
    }
    Ok(s)
}

fn rde_field(field: FieldName, scale: f64, dim: usize) -> Result<(VectorFieldSpec, Vec<f64>)> {
    match field {
        FieldName::Rotation => {
            if dim != 2 {
                return Err(invalid("the rotation field needs a 2-dimensional driver"));
            }
            let a1 = vec![0.0, 0.0, 0.0, 0.0, 0.0, -scale, 0.0, scale, 0.0];
            let a2 = vec![0.0, 0.0, scale, 0.0, 0.0, 0.0, -scale, 0.0, 0.0];
            Ok((VectorFieldSpec::linear(3, vec![a1, a2]).setup("field")?, vec![1.0, 0.0, 0.0]))
        }
        FieldName::Scalar => {
            if dim != 1 {
                return Err(invalid("the scalar field needs a 1-dimensional driver"));
            }
            Ok((VectorFieldSpec::linear(1, vec![vec![scale]]).setup("field")?, vec![1.0]))
        }
    }
}

fn brownian_grid(cfg: &ExperimentConfig) -> Result<TimeGrid> {
    let d = driver_block(cfg)?;
    if d.kind != DriverName::Bm || d.dim != 1 {
        return Err(invalid("this functional is driven by a one-dimensional Brownian motion (driver.kind = \"bm\")"));
    }
    TimeGrid::uniform(d.horizon, d.steps).setup("driver grid")
}

enum Functional {
    Identity(WhiteNoiseIdentity),
    Lift(RoughPathLift),
    Rde(RdeFunctional, GaussianSampler, VectorFieldSpec, Vec<f64>),
    Ito(ItoModelFunctional),
    LogPrice(LogPriceFunctional),
}

macro_rules! with_functional {
    ($f:expr, $g:ident => $body:expr) => {
        match $f {
            Functional::Identity($g) => $body,
            Functional::Lift($g) => $body,
            Functional::Rde($g, ..) => $body,
            Functional::Ito($g) => $body,
            Functional::LogPrice($g) => $body,
        }
    };
}

fn functional(cfg: &ExperimentConfig) -> Result<Functional> {
    let block = cfg
        .functional
        .as_ref()
        .ok_or_else(|| invalid(format!("`{}` needs a [functional] section", cfg.command.name())))?;
    Ok(match block {
        FunctionalBlock::Identity => {
            let s = sampler(cfg)?;
            if !s.spec().white_noise_driven() || !matches!(s.spec().kind, DriverKind::BrownianMotion) {
                return Err(invalid("the identity functional is defined for Brownian drivers"));
            }
            Functional::Identity(WhiteNoiseIdentity { driver: *s.spec(), grid: s.grid().clone() })
        }
        FunctionalBlock::Lift { p } => {
            if !(*p > 2.0 && *p < 3.0) {
                return Err(invalid(format!("functional.p = {p} outside (2, 3)")));
            }
            Functional::Lift(RoughPathLift { sampler: sampler(cfg)?, seed: cfg.seed, p: *p })
        }
        FunctionalBlock::Rde { p, q, field, scale } => {
            let s = sampler(cfg)?;
            let (vf, y0) = rde_field(*field, *scale, s.spec().dim)?;
            let f = RdeFunctional::new(s.clone(), cfg.seed, *p, *q, vf.clone(), y0.clone()).setup("functional")?;
            Functional::Rde(f, s, vf, y0)
        }
        FunctionalBlock::ItoModel { hurst, kappa, j0, j1 } => Functional::Ito(
            ItoModelFunctional::new(brownian_grid(cfg)?, *hurst, *kappa, TestFunctionFamily::dyadic(*j0, *j1), cfg.seed)
                .setup("functional")?,
        ),
        FunctionalBlock::LogPrice { hurst, coeffs, gamma } => Functional::LogPrice(
            LogPriceFunctional::new(
                brownian_grid(cfg)?,
                *hurst,
                VolatilityFunction::Polynomial { coeffs: coeffs.clone() },
                *gamma,
                cfg.seed,
            )
            .setup("functional")?,
        ),
    })
}

fn path_rows(paths: &[Path]) -> Vec<Vec<String>> {
    paths
        .iter()
        .enumerate()
        .flat_map(|(k, p)| {
            (0..p.grid().len()).map(move |i| {
                let mut row = vec![k.to_string(), p.grid().t(i).to_string()];
                row.extend(p.value(i).iter().map(|v| v.to_string()));
                row
            })
        })
        .collect()
}

fn path_header(prefix: &str, dim: usize) -> Vec<String> {
    let mut h = vec!["sample".to_string(), "t".to_string()];
    h.extend((1..=dim).map(|c| format!("{prefix}_{c}")));
    h
}

fn simulate(cfg: &ExperimentConfig) -> Result<Outputs> {
    let s = sampler(cfg)?;
    let paths = s.sample_paths(cfg.sampling.n, cfg.seed);
    let dim = s.spec().dim;
    let terminal: Vec<f64> = (0..dim)
        .map(|c| mean(&paths.iter().map(|p| p.value(p.grid().steps())[c].powi(2)).collect::<Vec<_>>()))
        .collect();
    let header = path_header("x", dim);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    Ok(Outputs {
        report: json!({
            "driver": s.spec(),
            "n": cfg.sampling.n,
            "steps": s.grid().steps(),
            "terminal_second_moment": terminal,
        }),
        csv: Some(csv_bytes(&header, path_rows(&paths))?),
        binary: None,
    })
}

fn lift(cfg: &ExperimentConfig) -> Result<Outputs> {
    let Functional::Lift(f) = functional(cfg)? else {
        return Err(invalid("`lift` needs functional.kind = \"lift\""));
    };
    let lifts: Vec<_> =
        (0..cfg.sampling.n as u64).into_par_iter().map(|i| lift_piecewise_linear(&f.sampler.sample(cfg.seed, i))).collect();
    let norms: Vec<f64> = lifts.par_iter().map(|rp| p_var_norm(rp, f.p).map(|r| r.value)).collect::<tcilab::Result<_>>().compute("p-variation")?;
    let mut chen = 0.0f64;
    for rp in &lifts {
        let n = rp.grid().steps();
        if n < 2 {
            continue;
        }
        let joined = chen_combine(&rp.segment(0, n / 2), &rp.segment(n / 2, n)).compute("Chen relation")?.value;
        let direct = rp.increment(0, n);
        let dev = joined.x.iter().chain(&joined.xx).zip(direct.x.iter().chain(&direct.xx)).map(|(a, b)| (a - b).abs());
        chen = dev.fold(chen, f64::max);
    }
    let mut binary = Vec::new();
    if let Some(first) = lifts.first() {
        first.to_container().write(&mut binary).compute("writing rough path")?;
    }
    Ok(Outputs {
        report: json!({
            "driver": f.sampler.spec(),
            "p": f.p,
            "n": norms.len(),
            "p_var_mean": mean(&norms),
            "p_var_median": median(&norms),
            "chen_max_deviation": chen,
        }),
        csv: Some(csv_bytes(
            &["sample", "p_var_norm"],
            norms.iter().enumerate().map(|(i, v)| vec![i.to_string(), v.to_string()]),
        )?),
        binary: Some(binary),
    })
}

fn rde_solutions(
    cfg: &ExperimentConfig,
    s: &GaussianSampler,
    vf: &VectorFieldSpec,
    y0: &[f64],
) -> Result<Vec<Path>> {
    let r = substeps(cfg)?;
    (0..cfg.sampling.n as u64)
        .into_par_iter()
        .map(|i| solve_rde_refined(&s.sample(cfg.seed, i), vf, y0, r).map(|sol| sol.to_path()))
        .collect::<tcilab::Result<_>>()
        .compute("RDE solve")
}

fn rde_p(cfg: &ExperimentConfig) -> f64 {
    match cfg.functional {
        Some(FunctionalBlock::Rde { p, .. }) => p,
        _ => unreachable!("checked by the caller"),
    }
}

fn solution_norms(paths: &[Path], p: f64) -> Result<Vec<f64>> {
    paths.par_iter().map(|y| path_p_var(y, p).map(|r| r.value)).collect::<tcilab::Result<_>>().compute("p-variation")
}

fn solve(cfg: &ExperimentConfig) -> Result<Outputs> {
    let Functional::Rde(_, s, vf, y0) = functional(cfg)? else {
        return Err(invalid("`solve-rde` needs functional.kind = \"rde\""));
    };
    let paths = rde_solutions(cfg, &s, &vf, &y0)?;
    let p = rde_p(cfg);
    let norms = solution_norms(&paths, p)?;
    let header = path_header("y", y0.len());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    Ok(Outputs {
        report: json!({
            "driver": s.spec(),
            "p": p,
            "substeps": substeps(cfg)?,
            "n": paths.len(),
            "p_var_mean": mean(&norms),
            "p_var_median": median(&norms),
            "p_var_max": norms.iter().copied().fold(0.0, f64::max),
        }),
        csv: Some(csv_bytes(&header, path_rows(&paths))?),
        binary: None,
    })
}

fn regression_csv(t: &[f64], d: &[f64]) -> Result<Vec<u8>> {
    csv_bytes(&["t", "median_distance"], t.iter().zip(d).map(|(t, d)| vec![t.to_string(), d.to_string()]))
}

fn model(cfg: &ExperimentConfig) -> Result<Outputs> {
    let Functional::Ito(f) = functional(cfg)? else {
        return Err(invalid("`model` needs functional.kind = \"ito-model\""));
    };
    let h = cfg.shift.as_ref().map(|b| Ok::<_, RunError>((shift(&white_noise_sampler(&f.grid)?, b)?, b.t_grid.clone())));
    let h = h.transpose()?;
    let models: Vec<ItoModel> = (0..cfg.sampling.n as u64)
        .into_par_iter()
        .map(|i| {
            let noise = BrownianNoise::sample(&f.grid, cfg.seed, i);
            ItoModel::build(&noise, f.symbols.hurst, f.symbols.kappa, Anchors::Default)
        })
        .collect::<tcilab::Result<_>>()
        .compute("model construction")?;
    let scaling = scaling_exponents(&models, &f.family).compute("scaling exponents")?;
    let mut report = json!({
        "hurst": f.symbols.hurst,
        "kappa": f.symbols.kappa,
        "m": f.symbols.m,
        "n": models.len(),
        "scaling": scaling,
    });
    let mut csv = None;
    if let Some((h, t)) = h {
        let reg = shift_exponent_regression(&f, &h, &t, cfg.sampling.n).compute("shift regression")?;
        csv = Some(regression_csv(&reg.t, &reg.median_distance)?);
        report["passed"] = json!(reg.small_ok && reg.large_ok);
        report["shift_regression"] = to_json(&reg);
    }
    Ok(Outputs { report, csv, binary: None })
}

fn white_noise_sampler(grid: &TimeGrid) -> Result<GaussianSampler> {
    GaussianSampler::new(DriverSpec::brownian(1), grid.clone()).setup("driver")
}

/// The shift direction for a functional, built on the functional's driver.
fn functional_shift(cfg: &ExperimentConfig, f: &Functional) -> Result<CameronMartinShift> {
    let block = shift_block(cfg)?;
    match f {
        Functional::Identity(g) => shift(&white_noise_sampler(&g.grid)?, block),
        Functional::Lift(g) => shift(&g.sampler, block),
        Functional::Rde(_, s, ..) => shift(s, block),
        Functional::Ito(g) => shift(&white_noise_sampler(&g.grid)?, block),
        Functional::LogPrice(_) => shift(&white_noise_sampler(&brownian_grid(cfg)?)?, block),
    }
}

fn tci(cfg: &ExperimentConfig) -> Result<Outputs> {
    let f = functional(cfg)?;
    let h = functional_shift(cfg, &f)?;
    let mut tc = TciConfig::new(h, shift_block(cfg)?.t_grid.clone(), cfg.sampling.n, cfg.seed);
    tc.n_ot = cfg.sampling.n_ot;
    if let Some(cost) = &cfg.cost {
        tc.cost_exponent = cost.exponent;
        tc.theoretical = cost.theoretical.map(|PowerMin { c, a, b }| DeviationFunction::PowerMin { c, a, b });
    }
    let rep = with_functional!(&f, g => run_tci_experiment(g, &tc)).map_err(|e| match e {
        tcilab::Error::Config(_) | tcilab::Error::Domain(_) | tcilab::Error::Shape(_) => {
            RunError::Config(anyhow!("tci: {e}"))
        }
        other => RunError::Numerical(anyhow!("tci: {other}")),
    })?;
    let rows = rep.rows.iter().map(|r| {
        vec![
            r.t.to_string(),
            r.shift_norm.to_string(),
            r.entropy.to_string(),
            r.sync_cost.to_string(),
            r.sync_sd.to_string(),
            opt(r.ot_cost),
            r.median_distance.to_string(),
            r.fitted_alpha.to_string(),
            opt(r.theoretical_alpha),
            r.satisfied.to_string(),
        ]
    });
    let csv = csv_bytes(
        &[
            "t",
            "shift_norm",
            "entropy",
            "sync_cost",
            "sync_sd",
            "ot_cost",
            "median_distance",
            "fitted_alpha",
            "theoretical_alpha",
            "satisfied",
        ],
        rows,
    )?;
    Ok(Outputs {
        report: json!({ "passed": rep.passed(), "verdict": rep.verdict, "report": rep }),
        csv: Some(csv),
        binary: None,
    })
}

/// Per-sample p-variation norm of the lift or the RDE solution.
fn norm_statistic(cfg: &ExperimentConfig, n: usize) -> Result<(Vec<f64>, Option<f64>)> {
    match functional(cfg)? {
        Functional::Lift(f) => {
            let v = (0..n as u64)
                .into_par_iter()
                .map(|i| p_var_norm(&lift_piecewise_linear(&f.sampler.sample(cfg.seed, i)), f.p).map(|r| r.value))
                .collect::<tcilab::Result<_>>()
                .compute("p-variation")?;
            Ok((v, None))
        }
        Functional::Rde(f, s, vf, y0) => {
            let r = substeps(cfg)?;
            let p = rde_p(cfg);
            let v = (0..n as u64)
                .into_par_iter()
                .map(|i| {
                    let y = solve_rde_refined(&s.sample(cfg.seed, i), &vf, &y0, r)?;
                    path_p_var(&y.to_path(), p).map(|r| r.value)
                })
                .collect::<tcilab::Result<_>>()
                .compute("RDE p-variation")?;
            Ok((v, Some(2.0 / f.q())))
        }
        _ => Err(invalid("the norm statistic is defined for the lift and rde functionals")),
    }
}

fn tails(cfg: &ExperimentConfig) -> Result<Outputs> {
    let (samples, target) = norm_statistic(cfg, cfg.sampling.n)?;
    let fit = fit_tail(&samples, None).map_err(|e| match e {
        tcilab::Error::FitRefused(_) => RunError::Config(anyhow!("tail fit refused: {e}")),
        other => RunError::Numerical(anyhow!("tail fit: {other}")),
    })?;
    let mut report = json!({ "n": samples.len(), "fit": fit });
    if let Some(target) = target {
        report["target_theta"] = json!(target);
        report["tolerance"] = json!(RDE_THETA_TOLERANCE);
        report["passed"] =
            json!((fit.theta - target).abs() <= RDE_THETA_TOLERANCE && fit.r_squared >= RDE_MIN_R_SQUARED);
    }
    let csv = csv_bytes(
        &["level", "survival", "exceedances"],
        (0..fit.levels.len())
            .map(|k| vec![fit.levels[k].to_string(), fit.survival[k].to_string(), fit.exceedances[k].to_string()]),
    )?;
    Ok(Outputs { report, csv: Some(csv), binary: None })
}

fn deviations(cfg: &ExperimentConfig) -> Result<Outputs> {
    let b = cfg.deviation.as_ref().ok_or_else(|| invalid("`deviations` needs a [deviation] section"))?;
    let total = b.replications * b.batch_sizes.iter().max().copied().unwrap_or(0);
    let map = |e: tcilab::Error| match e {
        tcilab::Error::Domain(_) => RunError::Config(anyhow!("deviation: {e}")),
        other => RunError::Numerical(anyhow!("deviation: {other}")),
    };
    let rep = match b.statistic {
        Statistic::GaussianSquare => {
            let (dim, seed) = (b.dim, cfg.seed);
            if dim == 0 {
                return Err(invalid("deviation.dim must be positive"));
            }
            let sampler = move |i: u64| {
                let mut rng = stream_rng(seed, i);
                tcilab::rng::normals(&mut rng, dim).iter().map(|g| g * g).sum::<f64>()
            };
            check_deviation(sampler, &b.batch_sizes, &b.levels, b.replications, b.power, b.threshold).map_err(map)?
        }
        Statistic::Norm => {
            let (values, _) = norm_statistic(cfg, total)?;
            let sampler = |i: u64| values[i as usize];
            check_deviation(sampler, &b.batch_sizes, &b.levels, b.replications, b.power, b.threshold).map_err(map)?
        }
    };
    let csv = csv_bytes(
        &["n", "s", "exceedances", "probability", "upper", "rate"],
        rep.points.iter().map(|p| {
            vec![
                p.n.to_string(),
                p.s.to_string(),
                p.exceedances.to_string(),
                p.probability.to_string(),
                p.upper.to_string(),
                p.rate.to_string(),
            ]
        }),
    )?;
    Ok(Outputs { report: json!({ "passed": rep.satisfied, "report": rep }), csv: Some(csv), binary: None })
}

fn pam(cfg: &ExperimentConfig) -> Result<Outputs> {
    let b = cfg.pam.as_ref().ok_or_else(|| invalid("`pam` needs a [pam] section"))?;
    if b.epsilons.is_empty() {
        return Err(invalid("pam.epsilons must not be empty"));
    }
    let c0 = b.c0.unwrap_or_else(lattice_c0);
    match b.mode {
        PamMode::Solve => {
            let u0 = TorusField::constant(b.k, 1.0).setup("pam grid")?;
            let mut sections = Vec::new();
            let mut summary = Vec::new();
            for &eps in &b.epsilons {
                let noise = MollifiedNoise::sample(b.k, eps, c0, cfg.seed, 0).setup("pam noise")?;
                let sol = solve_pam(&u0, &noise.renormalised_potential(), b.t, b.dt, &[b.t]).compute("pam solve")?;
                let u = sol.last();
                summary.push(json!({ "epsilon": eps, "c_eps": noise.c_eps, "mean": u.mean(), "sup": u.sup_norm() }));
                sections.push((format!("u_eps_{eps}"), u.values().to_vec()));
            }
            let container = Container { times: vec![b.t], dim: 1, values: vec![b.t], sections };
            let mut binary = Vec::new();
            container.write(&mut binary).compute("writing fields")?;
            Ok(Outputs {
                report: json!({ "k": b.k, "t": b.t, "c0": c0, "levels": summary }),
                csv: None,
                binary: Some(binary),
            })
        }
        PamMode::Cauchy => {
            let xi = MollifiedNoise::sample(b.k, b.epsilons[0], c0, cfg.seed, 0).setup("pam noise")?.xi;
            let study = cauchy_study(&xi, &b.epsilons, c0, b.t, b.dt).compute("cauchy study")?;
            let csv = csv_bytes(
                &["epsilon", "renormalised", "unrenormalised"],
                (0..study.epsilons.len()).map(|k| {
                    vec![
                        study.epsilons[k].to_string(),
                        study.renormalised[k].to_string(),
                        study.unrenormalised[k].to_string(),
                    ]
                }),
            )?;
            Ok(Outputs {
                report: json!({
                    "renormalised_decreasing": study.renormalised_decreasing(),
                    "unrenormalised_increasing": study.unrenormalised_increasing(),
                    "study": study,
                }),
                csv: Some(csv),
                binary: None,
            })
        }
        PamMode::Tails => {
            let tc = PamTailConfig {
                k: b.k,
                epsilons: b.epsilons.clone(),
                t: b.t,
                dt: b.dt,
                realisations: b.realisations,
                c0,
                seed: cfg.seed,
            };
            let levels = pam_tail_study(&tc).compute("pam tails")?;
            let csv = csv_bytes(
                &["epsilon", "realisation", "log_positive"],
                levels.iter().flat_map(|l| {
                    l.log_positive.iter().enumerate().map(move |(i, v)| vec![l.epsilon.to_string(), i.to_string(), v.to_string()])
                }),
            )?;
            let summary: Vec<Value> = levels
                .iter()
                .map(|l| {
                    json!({
                        "epsilon": l.epsilon,
                        "theta": l.theta(),
                        "fit": l.fit,
                        "refusal": l.refusal,
                        "v_half_moment": l.v_half_moment,
                        "lognormal_slope": l.lognormal_slope,
                    })
                })
                .collect();
            Ok(Outputs { report: json!({ "k": b.k, "t": b.t, "c0": c0, "levels": summary }), csv: Some(csv), binary: None })
        }
    }
}

fn wlsi(cfg: &ExperimentConfig) -> Result<Outputs> {
    let b = cfg.wlsi.as_ref().ok_or_else(|| invalid("`wlsi` needs a [wlsi] section"))?;
    let grid = TimeGrid::uniform(1.0, b.steps).setup("wlsi grid")?;
    let need = |v: Option<f64>, key: &str| v.ok_or_else(|| invalid(format!("wlsi.{key} is required for this example")));
    let spec = match b.example {
        WlsiExample::Polynomial => {
            if b.powers.is_empty() {
                return Err(invalid("wlsi.powers is required for the polynomial example"));
            }
            FunctionalSpec::cosine_polynomial(grid, b.powers.clone()).setup("wlsi example")?
        }
        WlsiExample::Triple => FunctionalSpec::new(
            FunctionalKind::RoughPathTriple { alpha: need(b.alpha, "alpha")?, dim: b.dim.unwrap_or(2), s: 0, t: b.steps },
            grid,
        )
        .setup("wlsi example")?,
        WlsiExample::Rde => FunctionalSpec::new(
            FunctionalKind::RdeEndpoint { rate: need(b.rate, "rate")?, y0: need(b.y0, "y0")?, p: need(b.p, "p")? },
            grid,
        )
        .setup("wlsi example")?,
    };
    let weight = spec.stated_weight();
    let n = cfg.sampling.n;
    let gradient = check_gradient_bound(&spec, &weight, n, cfg.seed).compute("gradient bound")?;
    let m = spec.output_dim();
    let inequality = check_wlsi(&spec, &weight, &standard_family(m), n, cfg.seed.wrapping_add(1)).compute("wlsi")?;
    let marginal = if m >= 2 {
        Some(check_marginal_wlsi(&spec, &weight, 0, &standard_family(m - 1), n, cfg.seed.wrapping_add(2)).compute("marginal wlsi")?)
    } else {
        None
    };
    let moments = check_moment_consequence(&spec, &weight, &b.p_grid, b.moment_n.unwrap_or(n), cfg.seed.wrapping_add(3))
        .compute("moment consequence")?;
    let passed = gradient.passed && inequality.passed && marginal.as_ref().is_none_or(|r| r.passed) && moments.passed;
    let csv = csv_bytes(
        &["p", "coordinate", "lhs", "lhs_se", "rhs", "rhs_se", "rhs_sqrt", "passed"],
        moments.rows.iter().map(|r| {
            vec![
                r.p.to_string(),
                r.coordinate.to_string(),
                r.lhs.to_string(),
                r.lhs_se.to_string(),
                r.rhs.to_string(),
                r.rhs_se.to_string(),
                r.rhs_sqrt.to_string(),
                r.passed.to_string(),
            ]
        }),
    )?;
    Ok(Outputs {
        report: json!({
            "passed": passed,
            "example": spec.kind,
            "weight": weight,
            "gradient_bound": gradient,
            "wlsi": inequality,
            "marginal": marginal,
            "moments": moments,
        }),
        csv: Some(csv),
        binary: None,
    })
}
