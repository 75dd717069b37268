//! Command-line front end.
//!
//! Every run resolves its configuration from defaults, an optional JSON file
//! (`--config`) and flags, in increasing priority, validates it, and writes
//! the resolved form to `<out>/manifest.json`. Passing that manifest back via
//! `--config` reproduces the run byte for byte.
//!
//! Exit codes: 0 success, 1 property violation, 2 usage or precondition
//! error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::activation::ActivationProfile;
use crate::approximation::{
    coefficient_l1, random_expansion, rate_table, FrameExpansion, RateSetup,
};
use crate::error::{Error, Result};
use crate::field::{fmt_f64, write_atomic, Grid};
use crate::inverse::{
    fit_convergence_order, forward_map, gauss_newton, perturb_params, reference_bumps,
    GaussNewtonOptions, GaussNewtonTrace, LinearOperator,
};
use crate::networks::{audit_dnn_gradient, audit_rqnn_gradient, NetworkParams, RadialParams};
use crate::phantom::{
    boundary_band, ellipses_to_gqnn, load_ellipses, rasterize, shepp_logan_ellipses, write_pgm,
};
use crate::rng::substream;
use crate::wavelets::{
    check_ati_item1, check_ati_item2, check_ati_mass, check_double_lipschitz, AtIQuintuple,
    InequalityReport, RadialKernelSystem, SamplingPlan, SigmoidKernelConstants,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "radnet",
    version,
    about = "Radial quadratic networks: AtI checks, rates, inversion, phantom"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config (a manifest from an earlier run works).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed [default: 42].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "radnet-out")]
    pub out: PathBuf,
    /// Input dimension.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub dim: Option<u8>,
    /// Print the summary as JSON.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the AtI inequalities for the radial kernel family.
    CheckAti(CheckAtiArgs),
    /// Greedy N-term errors of a random expansion against the rate bound.
    Rate(RateArgs),
    /// Gauss-Newton recovery of a two-neuron RQNN from operator data.
    Invert(InvertArgs),
    /// Rasterize the Shepp-Logan phantom GQNN.
    Phantom(PhantomArgs),
    /// Compare analytic network derivatives with central differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationChoice {
    Sigmoid,
    GaussianTail,
    Heaviside,
}

impl ActivationChoice {
    fn profile(self) -> ActivationProfile {
        match self {
            Self::Sigmoid => ActivationProfile::sigmoid(),
            Self::GaussianTail => ActivationProfile::gaussian_tail(),
            Self::Heaviside => ActivationProfile::heaviside(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorChoice {
    Identity,
    CumulativeIntegration,
    GaussianBlur,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GradFamily {
    Rqnn,
    Dnn4,
}

#[derive(Debug, Args)]
pub struct CheckAtiArgs {
    #[arg(long)]
    pub activation: Option<ActivationChoice>,
    /// Admissible random tuples per inequality.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub k_min: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    pub k_max: Option<i32>,
    /// Multiplies every proven constant `C`; values below 1 force failures.
    #[arg(long)]
    pub constant_scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    /// Atoms in the random expansion.
    #[arg(long)]
    pub terms: Option<usize>,
    /// Comma-separated N values.
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<usize>>,
    /// Use this expansion (JSON) instead of a random one.
    #[arg(long)]
    pub expansion: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[arg(long)]
    pub operator: Option<OperatorChoice>,
    #[arg(long)]
    pub blur_width: Option<f64>,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub start_offset: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Amplitude of a deterministic perturbation added to the data.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Ground-truth RQNN (JSON network document) instead of the built-in bumps.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Ellipse table (CSV) replacing the bundled Shepp-Logan one.
    #[arg(long)]
    pub ellipses: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub family: Option<GradFamily>,
    #[arg(long)]
    pub activation: Option<ActivationChoice>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub neurons: Option<usize>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckAtiParams {
    pub activation: ActivationChoice,
    pub samples: usize,
    pub k_min: i32,
    pub k_max: i32,
    pub constant_scale: f64,
    pub mass_k_min: i32,
    pub mass_k_max: i32,
    pub mass_anchors: usize,
    pub mass_tol: f64,
}

impl Default for CheckAtiParams {
    fn default() -> Self {
        let plan = SamplingPlan::default();
        Self {
            activation: ActivationChoice::Sigmoid,
            samples: plan.samples,
            k_min: plan.k_min,
            k_max: plan.k_max,
            constant_scale: 1.0,
            mass_k_min: -2,
            mass_k_max: 4,
            mass_anchors: 5,
            mass_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateParams {
    pub terms: usize,
    pub n_values: Vec<usize>,
    pub expansion: Option<PathBuf>,
}

impl Default for RateParams {
    fn default() -> Self {
        Self {
            terms: 64,
            n_values: vec![0, 1, 2, 4, 8, 16, 32, 64],
            expansion: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvertParams {
    pub operator: OperatorChoice,
    pub blur_width: f64,
    pub cells: usize,
    pub start_offset: f64,
    pub max_iter: usize,
    pub stop_tol: f64,
    pub noise: f64,
    pub truth: Option<PathBuf>,
}

impl Default for InvertParams {
    fn default() -> Self {
        Self {
            operator: OperatorChoice::Identity,
            blur_width: 0.02,
            cells: 200,
            start_offset: 1e-3,
            max_iter: 12,
            stop_tol: 1e-15,
            noise: 0.0,
            truth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomParams {
    pub resolution: usize,
    pub ellipses: Option<PathBuf>,
}

impl Default for PhantomParams {
    fn default() -> Self {
        Self {
            resolution: 256,
            ellipses: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckParams {
    pub family: GradFamily,
    pub activation: ActivationChoice,
    pub samples: usize,
    pub neurons: usize,
    pub step: f64,
    pub tol: f64,
}

impl Default for GradcheckParams {
    fn default() -> Self {
        Self {
            family: GradFamily::Rqnn,
            activation: ActivationChoice::Sigmoid,
            samples: 50,
            neurons: 3,
            step: 1e-3,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "params", rename_all = "kebab-case")]
pub enum CommandParams {
    CheckAti(CheckAtiParams),
    Rate(RateParams),
    Invert(InvertParams),
    Phantom(PhantomParams),
    Gradcheck(GradcheckParams),
}

/// Fully resolved configuration of one run; serialized as the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    pub seed: u64,
    pub dim: usize,
    #[serde(flatten)]
    pub command: CommandParams,
}

#[derive(Debug, Default, Deserialize)]
struct ConfigFile {
    seed: Option<u64>,
    dim: Option<usize>,
    command: Option<String>,
    params: Option<Value>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn file_params<T: Default + for<'de> Deserialize<'de>>(file: &ConfigFile, name: &str) -> Result<T> {
    if let Some(cmd) = &file.command {
        if cmd != name {
            return Err(Error::InvalidParams(format!(
                "config file is for `{cmd}`, not `{name}`"
            )));
        }
    }
    match &file.params {
        Some(v) => Ok(serde_json::from_value(v.clone())?),
        None => Ok(T::default()),
    }
}

/// Merges defaults, the config file and flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let file: ConfigFile = match &cli.common.config {
        Some(path) => serde_json::from_str(
            &std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidParams(format!("{}: {e}", path.display())))?,
        )?,
        None => ConfigFile::default(),
    };
    let seed = cli.common.seed.or(file.seed).unwrap_or(42);
    let dim_override = cli.common.dim.map(usize::from).or(file.dim);
    let (command, default_dim) = match &cli.command {
        Command::CheckAti(a) => {
            let mut p: CheckAtiParams = file_params(&file, "check-ati")?;
            set(&mut p.activation, a.activation);
            set(&mut p.samples, a.samples);
            set(&mut p.k_min, a.k_min);
            set(&mut p.k_max, a.k_max);
            set(&mut p.constant_scale, a.constant_scale);
            (CommandParams::CheckAti(p), 1)
        }
        Command::Rate(a) => {
            let mut p: RateParams = file_params(&file, "rate")?;
            set(&mut p.terms, a.terms);
            set(&mut p.n_values, a.n_values.clone());
            if a.expansion.is_some() {
                p.expansion = a.expansion.clone();
            }
            (CommandParams::Rate(p), 1)
        }
        Command::Invert(a) => {
            let mut p: InvertParams = file_params(&file, "invert")?;
            set(&mut p.operator, a.operator);
            set(&mut p.blur_width, a.blur_width);
            set(&mut p.cells, a.cells);
            set(&mut p.start_offset, a.start_offset);
            set(&mut p.max_iter, a.max_iter);
            set(&mut p.noise, a.noise);
            if a.truth.is_some() {
                p.truth = a.truth.clone();
            }
            (CommandParams::Invert(p), 1)
        }
        Command::Phantom(a) => {
            let mut p: PhantomParams = file_params(&file, "phantom")?;
            set(&mut p.resolution, a.resolution);
            if a.ellipses.is_some() {
                p.ellipses = a.ellipses.clone();
            }
            (CommandParams::Phantom(p), 2)
        }
        Command::Gradcheck(a) => {
            let mut p: GradcheckParams = file_params(&file, "gradcheck")?;
            set(&mut p.family, a.family);
            set(&mut p.activation, a.activation);
            set(&mut p.samples, a.samples);
            set(&mut p.neurons, a.neurons);
            set(&mut p.step, a.step);
            set(&mut p.tol, a.tol);
            let d = if p.family == GradFamily::Dnn4 { 1 } else { 2 };
            (CommandParams::Gradcheck(p), d)
        }
    };
    Ok(RunConfig {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        dim: dim_override.unwrap_or(default_dim),
        command,
    })
}

fn positive(errs: &mut Vec<String>, name: &str, v: f64) {
    if !(v.is_finite() && v > 0.0) {
        errs.push(format!("{name} must be positive and finite, got {v}"));
    }
}

impl RunConfig {
    /// Every problem with the configuration, so they can be reported at once.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = vec![];
        if !(1..=2).contains(&self.dim) {
            errs.push(format!("dim must be 1 or 2, got {}", self.dim));
        }
        let smooth = |errs: &mut Vec<String>, a: ActivationChoice| {
            if let Err(e) = a.profile().require_order(2) {
                errs.push(e.to_string());
            }
        };
        match &self.command {
            CommandParams::CheckAti(p) => {
                smooth(&mut errs, p.activation);
                if p.samples == 0 {
                    errs.push("samples must be at least 1".into());
                }
                if p.k_min > p.k_max {
                    errs.push(format!("k_min {} exceeds k_max {}", p.k_min, p.k_max));
                }
                if p.mass_k_min > p.mass_k_max {
                    errs.push(format!(
                        "mass_k_min {} exceeds mass_k_max {}",
                        p.mass_k_min, p.mass_k_max
                    ));
                }
                positive(&mut errs, "constant_scale", p.constant_scale);
                positive(&mut errs, "mass_tol", p.mass_tol);
            }
            CommandParams::Rate(p) => {
                if p.expansion.is_none() && p.terms == 0 {
                    errs.push("terms must be at least 1".into());
                }
                if p.n_values.is_empty() {
                    errs.push("n_values is empty".into());
                }
                if let Some(path) = &p.expansion {
                    if !path.is_file() {
                        errs.push(format!("expansion file {} not found", path.display()));
                    }
                }
            }
            CommandParams::Invert(p) => {
                if self.dim != 1 {
                    errs.push(format!(
                        "invert works on [0, 1]; dim must be 1, got {}",
                        self.dim
                    ));
                }
                if p.cells < 2 {
                    errs.push(format!("cells must be at least 2, got {}", p.cells));
                }
                if p.max_iter == 0 {
                    errs.push("max_iter must be at least 1".into());
                }
                positive(&mut errs, "blur_width", p.blur_width);
                positive(&mut errs, "start_offset", p.start_offset);
                positive(&mut errs, "stop_tol", p.stop_tol);
                if !(p.noise.is_finite() && p.noise >= 0.0) {
                    errs.push(format!("noise must be non-negative, got {}", p.noise));
                }
                if let Some(path) = &p.truth {
                    if !path.is_file() {
                        errs.push(format!("truth file {} not found", path.display()));
                    }
                }
            }
            CommandParams::Phantom(p) => {
                if self.dim != 2 {
                    errs.push(format!(
                        "the phantom is two-dimensional; dim must be 2, got {}",
                        self.dim
                    ));
                }
                if p.resolution == 0 {
                    errs.push("resolution must be at least 1".into());
                }
                if let Some(path) = &p.ellipses {
                    if !path.is_file() {
                        errs.push(format!("ellipse table {} not found", path.display()));
                    }
                }
            }
            CommandParams::Gradcheck(p) => {
                smooth(&mut errs, p.activation);
                if p.family == GradFamily::Dnn4 && self.dim != 1 {
                    errs.push(format!(
                        "DNN4 has scalar input; dim must be 1, got {}",
                        self.dim
                    ));
                }
                if p.samples == 0 || p.neurons == 0 {
                    errs.push("samples and neurons must be at least 1".into());
                }
                positive(&mut errs, "step", p.step);
                positive(&mut errs, "tol", p.tol);
            }
        }
        errs
    }

    fn name(&self) -> &'static str {
        match self.command {
            CommandParams::CheckAti(_) => "check-ati",
            CommandParams::Rate(_) => "rate",
            CommandParams::Invert(_) => "invert",
            CommandParams::Phantom(_) => "phantom",
            CommandParams::Gradcheck(_) => "gradcheck",
        }
    }
}

/// What a command produced: a JSON summary and whether the checked property
/// held.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: Value,
    pub passed: bool,
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn cmd_check_ati(cfg: &RunConfig, p: &CheckAtiParams, out: &Path) -> Result<Outcome> {
    let sys = RadialKernelSystem::new(p.activation.profile(), 1.0, cfg.dim)?.with_decay_constant();
    let c_sigma = sys.c_sigma();
    let consts = SigmoidKernelConstants::new(cfg.dim, sys.c_n, c_sigma);
    let s = p.constant_scale;
    let quint = AtIQuintuple::for_radial(cfg.dim, sys.c_n, c_sigma)?;
    let plan = SamplingPlan::default()
        .with_samples(p.samples)
        .with_seed(cfg.seed)
        .with_k_range(p.k_min, p.k_max);
    let mass_plan = plan.with_k_range(p.mass_k_min, p.mass_k_max);
    let reports: Vec<InequalityReport> = vec![
        check_ati_item1(&sys, &quint.with_c(s * consts.item1), &plan)?,
        check_ati_item2(&sys, &quint.with_c(s * consts.item2), &plan)?,
        check_ati_mass(&sys, &mass_plan, p.mass_anchors, p.mass_tol)?,
        check_double_lipschitz(
            &sys,
            &quint.with_tilde_c(s * consts.double_lipschitz),
            &plan,
        )?,
    ];
    let passed = reports.iter().all(InequalityReport::passed);
    let summary = json!({
        "c_n": sys.c_n,
        "c_sigma": c_sigma,
        "box_half_width": sys.box_half_width,
        "passed": passed,
        "violations": reports.iter().map(|r| r.violations).sum::<usize>(),
        "reports": reports,
    });
    write_json(&out.join("check_ati.json"), &summary)?;
    Ok(Outcome { summary, passed })
}

fn cmd_rate(cfg: &RunConfig, p: &RateParams, out: &Path) -> Result<Outcome> {
    let sys = RadialKernelSystem::sigmoid(cfg.dim)?;
    let setup = RateSetup::standard(cfg.dim)?;
    let exp = match &p.expansion {
        Some(path) => FrameExpansion::from_json(&std::fs::read_to_string(path)?)?,
        None => random_expansion(
            &setup.dict,
            p.terms,
            &mut substream(cfg.seed, "rate-expansion"),
        )?,
    };
    if exp.terms().iter().any(|t| t.atom.dim() != cfg.dim) {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim,
            got: exp.terms()[0].atom.dim(),
        });
    }
    let rows = rate_table(&sys, &exp, &setup.grid, &p.n_values)?;
    let mut csv = String::from("N,l2_error,bound\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            r.n_terms,
            fmt_f64(r.l2_error),
            fmt_f64(r.bound)
        ));
    }
    write_atomic(&out.join("rate.csv"), csv.as_bytes())?;
    let mut exp_json = exp.to_json()?.into_bytes();
    exp_json.push(b'\n');
    write_atomic(&out.join("expansion.json"), &exp_json)?;
    let passed = rows.iter().all(|r| r.holds());
    let summary = json!({
        "terms": exp.len(),
        "coefficient_l1": coefficient_l1(&exp),
        "passed": passed,
        "rows": rows,
    });
    Ok(Outcome { summary, passed })
}

fn cmd_invert(cfg: &RunConfig, p: &InvertParams, out: &Path) -> Result<Outcome> {
    let act = ActivationProfile::sigmoid();
    let grid = Grid::midpoint_box(&[0.0], &[1.0], p.cells)?;
    let truth: RadialParams = match &p.truth {
        Some(path) => match NetworkParams::from_json(&std::fs::read_to_string(path)?)? {
            NetworkParams::Rqnn(r) if r.input_dim() == Some(1) => r,
            other => {
                return Err(Error::InvalidParams(format!(
                    "truth must be a one-dimensional RQNN, got {} with n = {:?}",
                    other.family().as_str(),
                    other.input_dim()
                )))
            }
        },
        None => reference_bumps(),
    };
    let op = match p.operator {
        OperatorChoice::Identity => LinearOperator::identity(grid),
        OperatorChoice::CumulativeIntegration => LinearOperator::cumulative_integration(grid),
        OperatorChoice::GaussianBlur => LinearOperator::gaussian_blur(grid, p.blur_width)?,
    };
    let mut y = forward_map(&op, &truth, &act)?;
    if p.noise > 0.0 {
        y.values
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v += p.noise * (17.0 * i as f64).sin());
    }
    let p0 = perturb_params(
        &truth,
        p.start_offset,
        &mut substream(cfg.seed, "gauss-newton-start"),
    );
    let opts = GaussNewtonOptions {
        max_iter: p.max_iter,
        stop_tol: p.stop_tol,
        ..Default::default()
    };
    let (trace, failure): (GaussNewtonTrace, Option<String>) =
        match gauss_newton(&op, &act, &y, &p0, &opts, Some(&truth)) {
            Ok(t) => (t, None),
            Err(Error::Diverged { trace, .. }) => (*trace, Some("diverged".into())),
            Err(Error::RankCollapse { trace, .. }) => (*trace, Some("rank collapse".into())),
            Err(e) => return Err(e),
        };
    trace.write_csv(&out.join("trace.csv"))?;
    trace.write_json(&out.join("trace.json"))?;
    let order = fit_convergence_order(&trace.param_errors(), 1e-13);
    let summary = json!({
        "operator": op.name(),
        "converged": trace.converged,
        "failure": failure,
        "iterations": trace.records.len().saturating_sub(1),
        "final_residual": trace.last().map(|r| r.residual_norm),
        "final_param_error": trace.last().and_then(|r| r.param_error),
        "iterations_to_1e-10": trace.iterations_to(1e-10),
        "fitted_order": order.map(|(q, c, pairs)| json!({"q": q, "C": c, "pairs": pairs})),
    });
    Ok(Outcome {
        summary,
        passed: failure.is_none(),
    })
}

fn cmd_phantom(_cfg: &RunConfig, p: &PhantomParams, out: &Path) -> Result<Outcome> {
    let ellipses = match &p.ellipses {
        Some(path) => load_ellipses(path)?,
        None => shepp_logan_ellipses(),
    };
    let net = ellipses_to_gqnn(&ellipses)?;
    let field = rasterize(&net, &ActivationProfile::heaviside(), p.resolution)?;
    let scaling = write_pgm(&field, &out.join("phantom.pgm"))?;
    field.write_csv(&out.join("phantom.csv"))?;
    let mut net_json = net.to_json()?.into_bytes();
    net_json.push(b'\n');
    write_atomic(&out.join("phantom_network.json"), &net_json)?;
    let band = boundary_band(&ellipses, &field.grid)
        .iter()
        .filter(|b| **b)
        .count();
    let summary = json!({
        "neurons": net.neurons(),
        "param_count": net.param_count(),
        "resolution": p.resolution,
        "min": scaling.min,
        "max": scaling.max,
        "boundary_band_nodes": band,
    });
    Ok(Outcome {
        summary,
        passed: true,
    })
}

fn cmd_gradcheck(cfg: &RunConfig, p: &GradcheckParams, out: &Path) -> Result<Outcome> {
    let act = p.activation.profile();
    let mut rng = substream(cfg.seed, "gradcheck");
    let audit = match p.family {
        GradFamily::Rqnn => {
            audit_rqnn_gradient(&act, cfg.dim, p.neurons, p.samples, p.step, &mut rng)?
        }
        GradFamily::Dnn4 => {
            audit_dnn_gradient(&act, p.neurons, p.neurons, p.samples, p.step, &mut rng)?
        }
    };
    let passed = audit.max_rel_err <= p.tol;
    let summary = json!({
        "family": audit.family,
        "activation": act.name(),
        "samples": audit.samples,
        "max_rel_err": audit.max_rel_err,
        "tol": p.tol,
        "passed": passed,
    });
    write_json(&out.join("gradcheck.json"), &summary)?;
    Ok(Outcome { summary, passed })
}

/// Runs a validated configuration, writing the manifest first.
pub fn execute(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    write_json(&out.join("manifest.json"), cfg)?;
    match &cfg.command {
        CommandParams::CheckAti(p) => cmd_check_ati(cfg, p, out),
        CommandParams::Rate(p) => cmd_rate(cfg, p, out),
        CommandParams::Invert(p) => cmd_invert(cfg, p, out),
        CommandParams::Phantom(p) => cmd_phantom(cfg, p, out),
        CommandParams::Gradcheck(p) => cmd_gradcheck(cfg, p, out),
    }
}

fn print_summary(name: &str, outcome: &Outcome, as_json: bool) {
    if as_json {
        println!(
            "{}",
            serde_json::to_string_pretty(&outcome.summary).expect("summary serializes")
        );
        return;
    }
    println!("{name}: {}", if outcome.passed { "ok" } else { "FAILED" });
    if let Value::Object(map) = &outcome.summary {
        for (k, v) in map {
            match v {
                Value::Array(_) | Value::Object(_) => {}
                _ => println!("  {k}: {v}"),
            }
        }
    }
    if !outcome.passed {
        // Violation dump for check-ati and rate.
        for key in ["reports", "rows"] {
            if let Some(v) = outcome.summary.get(key) {
                println!(
                    "{}",
                    serde_json::to_string_pretty(v).expect("summary serializes")
                );
            }
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let problems = cfg.validate();
    if !problems.is_empty() {
        eprintln!("error: invalid configuration for `{}`:", cfg.name());
        for p in &problems {
            eprintln!("  - {p}");
        }
        return EXIT_USAGE;
    }
    match execute(&cfg, &cli.common.out) {
        Ok(outcome) => {
            print_summary(cfg.name(), &outcome, cli.common.json);
            if outcome.passed {
                EXIT_OK
            } else {
                EXIT_VIOLATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
