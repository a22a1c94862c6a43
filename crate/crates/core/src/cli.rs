//! Batch front end behind the `errfilt` binary.
//!
//! Every command evaluates a parameter grid and writes one CSV row per grid
//! point, preceded by `#` metadata lines. Grid points are evaluated in
//! parallel but assembled in grid order, and all randomness is keyed by
//! `--seed`, so output is byte-identical for any `--threads`.
//!
//! Grids are comma lists whose items are numbers or inclusive ranges
//! `start:stop:step`. A `--config` TOML file holds the same keys as the
//! flags (underscores or dashes), plus `command` and, for `figure`, `id`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::coherent::{self, CoherentConfig, CoherentMethod};
use crate::filtration::{
    self, closed_fidelity_single_rail_limit, closed_probability_single_rail_limit, closed_symmetric_limit,
    Noise, ProtocolConfig,
};
use crate::interferometers::{even_splitter, fourier, InterferometerKind};
use crate::phase_noise::{Kappa, PhaseDistribution};
use crate::qfi::{closed_j_dark, closed_j_dark_limit, StellarQfiParams};
use crate::stellar::{self, ImperfectionStudy, StellarScenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SPEC: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_IO: i32 = 4;

const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Spec(_) => EXIT_SPEC,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Spec(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Real-valued grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

/// Integer grid (branch counts).
#[derive(Debug, Clone, PartialEq)]
pub struct Counts(pub Vec<usize>);

fn range_len(start: f64, stop: f64, step: f64) -> Result<usize, String> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err("grid bounds must be finite".into());
    }
    if step <= 0.0 {
        return Err(format!("grid step {step} must be positive"));
    }
    if stop < start {
        return Err(format!("grid stop {stop} below start {start}"));
    }
    let n = ((stop - start) / step + 0.5).floor() + 1.0;
    if n > MAX_GRID_POINTS as f64 {
        return Err(format!("grid has more than {MAX_GRID_POINTS} points"));
    }
    Ok(n as usize)
}

fn parse_num(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"))
}

/// `a,b,c`, `start:stop:step` or a mix. Ranges include `stop` when the last
/// step lands within half a step of it.
pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [x] => out.push(parse_num(x)?),
            [a, b, c] => {
                let (start, stop, step) = (parse_num(a)?, parse_num(b)?, parse_num(c)?);
                let n = range_len(start, stop, step)?;
                for i in 0..n {
                    let v = start + i as f64 * step;
                    // snap float drift so e.g. 0:1:0.05 ends exactly at 1
                    out.push(if (v - stop).abs() < 1e-9 * step { stop } else { v });
                }
            }
            _ => return Err(format!("`{item}` is neither a number nor start:stop:step")),
        }
    }
    if out.is_empty() || out.iter().any(|v| !v.is_finite()) {
        return Err("grid must be nonempty and finite".into());
    }
    Ok(Grid(out))
}

/// `1,2,10`, `1:5` or `1:9:2`.
pub fn parse_counts(s: &str) -> Result<Counts, String> {
    let int = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    let mut out = Vec::new();
    for item in s.split(',') {
        let parts: Vec<&str> = item.split(':').collect();
        let (a, b, step) = match parts.as_slice() {
            [x] => {
                out.push(int(x)?);
                continue;
            }
            [a, b] => (int(a)?, int(b)?, 1),
            [a, b, c] => (int(a)?, int(b)?, int(c)?),
            _ => return Err(format!("`{item}` is not an integer list item")),
        };
        if step == 0 || b < a {
            return Err(format!("bad integer range `{item}`"));
        }
        out.extend((a..=b).step_by(step));
    }
    if out.len() > MAX_GRID_POINTS {
        return Err("too many branch counts".into());
    }
    Ok(Counts(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Device {
    Fourier,
    EvenSplitter,
    /// Even splitter with Gaussian reflectivity noise `--sigma-r`.
    Perturbed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct DeviceArgs {
    #[arg(long, value_enum, default_value = "fourier")]
    pub interferometer: Device,
    /// Reflectivity noise for `--interferometer perturbed`.
    #[arg(long, default_value_t = 0.02)]
    pub sigma_r: f64,
    /// Decode with an independently perturbed device instead of the exact
    /// inverse of the encoder.
    #[arg(long)]
    pub mismatched: bool,
}

impl DeviceArgs {
    fn kind(&self, seed: u64) -> InterferometerKind {
        match self.interferometer {
            Device::Fourier => InterferometerKind::Fourier,
            Device::EvenSplitter => InterferometerKind::EvenSplitter,
            Device::Perturbed => InterferometerKind::Perturbed { sigma_r: self.sigma_r, seed, matched: !self.mismatched },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct FiltrationArgs {
    #[arg(long, value_parser = parse_counts, default_value = "1,2,10")]
    pub n: Counts,
    #[arg(long, value_parser = parse_grid, default_value = "0:1:0.05")]
    pub kappa: Grid,
    /// Gaussian phase-noise widths; switches to sampled phases (replaces
    /// `--kappa`).
    #[arg(long, value_parser = parse_grid)]
    pub sigma: Option<Grid>,
    /// Shots per point for sampled phases.
    #[arg(long, default_value_t = 100_000)]
    pub shots: usize,
    #[command(flatten)]
    pub device: DeviceArgs,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct LossyArgs {
    #[command(flatten)]
    pub base: FiltrationArgs,
    #[arg(long, value_parser = parse_grid, default_value = "0.5,0.8,0.9,1")]
    pub eta: Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoherentMethodArg {
    /// Quadrature for `N ≤ 2`, Monte Carlo otherwise.
    Auto,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct CoherentArgs {
    #[arg(long, value_parser = parse_counts, default_value = "1,2,3,4,5")]
    pub n: Counts,
    #[arg(long, value_parser = parse_grid, default_value = "0:0.2:0.005")]
    pub sigma: Grid,
    #[arg(long, default_value_t = 200.0)]
    pub alpha_sq: f64,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: CoherentMethodArg,
    #[arg(long, default_value_t = coherent::DEFAULT_SAMPLES)]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct StellarArgs {
    #[arg(long, value_parser = parse_counts, default_value = "1,2,10")]
    pub n: Counts,
    #[arg(long, value_parser = parse_grid, default_value = "1")]
    pub gamma: Grid,
    #[arg(long, value_parser = parse_grid, default_value = "0:1:0.05")]
    pub kappa: Grid,
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
    /// Dark-count probabilities.
    #[arg(long, value_parser = parse_grid, default_value = "0")]
    pub p: Grid,
    #[command(flatten)]
    pub device: DeviceArgs,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ImperfectionArgs {
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 0.02)]
    pub sigma_r: f64,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    #[arg(long, value_parser = parse_grid, default_value = "1,0.95")]
    pub gamma: Grid,
    #[arg(long, value_parser = parse_grid, default_value = "0.5:1:0.05")]
    pub kappa: Grid,
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
    #[arg(long)]
    pub mismatched: bool,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct DarkCountArgs {
    #[arg(long, value_parser = parse_counts, default_value = "2,10")]
    pub n: Counts,
    #[arg(long, value_parser = parse_grid, default_value = "1,0.95")]
    pub gamma: Grid,
    #[arg(long, value_parser = parse_grid, default_value = "0:1:0.05")]
    pub kappa: Grid,
    #[arg(long, value_parser = parse_grid, default_value = "0,0.001,0.01,0.1")]
    pub p: Grid,
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    SingleFidelity,
    SymmetricFidelity,
    LossyFidelity,
    #[value(name = "coherent-200")]
    Coherent200,
    #[value(name = "qfi-gamma-1")]
    QfiGamma1,
    #[value(name = "qfi-gamma-0.95")]
    QfiGamma095,
    UnevenBs,
    DarkCounts,
}

impl FigureId {
    fn argv(self) -> &'static [&'static str] {
        match self {
            Self::SingleFidelity => &["fidelity-single", "--n", "1,2,3,5,10", "--kappa", "0:1:0.02"],
            Self::SymmetricFidelity => &["fidelity-symmetric", "--n", "1,2,3,5,10", "--kappa", "0:1:0.02"],
            Self::LossyFidelity => &["fidelity-lossy", "--n", "1,2,5,10", "--kappa", "0:1:0.05", "--eta", "0.5,0.8,0.9,1"],
            Self::Coherent200 => &["fidelity-coherent", "--n", "1:5", "--sigma", "0:0.2:0.005", "--alpha-sq", "200", "--method", "monte-carlo"],
            Self::QfiGamma1 => &["qfi-stellar", "--n", "1,2,10", "--gamma", "1", "--kappa", "0:1:0.05"],
            Self::QfiGamma095 => &["qfi-stellar", "--n", "1,2,10", "--gamma", "0.95", "--kappa", "0:1:0.05"],
            Self::UnevenBs => &["imperfection-study", "--n", "4", "--sigma-r", "0.02", "--runs", "100", "--gamma", "0.5,0.8", "--kappa", "0:1:0.05"],
            Self::DarkCounts => &["dark-count-study", "--n", "2,10", "--gamma", "1,0.95", "--kappa", "0:1:0.05", "--p", "0,0.001,0.01,0.1"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Single-rail filtration: noise on the B arm only.
    FidelitySingle(FiltrationArgs),
    /// Filtration of both arms.
    FidelitySymmetric(FiltrationArgs),
    /// Single-rail filtration with line transmissivity `--eta`.
    FidelityLossy(LossyArgs),
    /// Coherent-state fidelity under Gaussian phase noise.
    FidelityCoherent(CoherentArgs),
    /// QFI for phase and visibility of the filtered stellar state.
    ///
    /// The columns are the diagonal of the 2x2 QFI matrix. The phase and
    /// visibility SLDs do not commute, so the two bounds are not jointly
    /// attainable; estimating both at once roughly doubles the covariance.
    QfiStellar(StellarArgs),
    /// Mean/std QFI over randomly perturbed splitter cascades.
    ImperfectionStudy(ImperfectionArgs),
    /// QFI with detector dark counts, simulated and closed form.
    DarkCountStudy(DarkCountArgs),
    /// Closed-form versus simulation cross-checks; exit 3 on any failure.
    Validate,
    /// Data behind one of the standard plots.
    Figure {
        #[arg(value_enum)]
        id: FigureId,
    },
}

#[derive(Debug, Parser)]
#[command(name = "errfilt", version, about = "Interferometric error filtration: sweeps, figure data and self-checks")]
pub struct Cli {
    /// TOML file with the command and its parameters.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Worker threads; does not affect the output.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

/// Everything that determines the output bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub command: Command,
    pub seed: u64,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(u64),
    Num(f64),
    Text(String),
    Empty,
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Num(x) => fmt_sig(*x),
            Value::Text(s) => s.clone(),
            Value::Empty => String::new(),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as u64)
    }
}

impl From<Option<f64>> for Value {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Value::Empty, Value::Num)
    }
}

/// One sweep's output.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    /// Names of failed checks (`validate` only).
    pub failures: Vec<String>,
}

impl Table {
    fn new(columns: Vec<&'static str>, rows: Vec<Vec<Value>>) -> Self {
        Self { columns, rows, failures: Vec::new() }
    }
}

/// 12 significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..12).contains(&e) {
        let s = format!("{:.*}", (11 - e).max(0) as usize, x);
        trim_fraction(&s).to_string()
    } else {
        let s = format!("{x:.11e}");
        let (mant, exp) = s.split_once('e').expect("exponent format");
        format!("{}e{}", trim_fraction(mant), exp)
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn kappa(x: f64) -> CliResult<Kappa> {
    Ok(Kappa::real(x)?)
}

/// `|a − b| / max(1, |b|)`, zero when both are the same infinity.
fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(1.0)
    }
}

fn par_rows<P, F>(points: Vec<P>, f: F) -> CliResult<Vec<Vec<Value>>>
where
    P: Send,
    F: Fn(P) -> CliResult<Vec<Value>> + Sync + Send,
{
    points.into_par_iter().map(f).collect()
}

fn filtration_table(args: &FiltrationArgs, etas: Option<&Grid>, symmetric: bool, seed: u64) -> CliResult<Table> {
    let sampled = args.sigma.is_some();
    let noise_axis: Vec<f64> = args.sigma.as_ref().unwrap_or(&args.kappa).0.clone();
    let eta_axis = etas.map_or(vec![1.0], |g| g.0.clone());
    let kind = args.device.kind(seed);
    let with_limits = etas.is_none();

    let mut columns = vec!["n"];
    if etas.is_some() {
        columns.push("eta");
    }
    columns.push("kappa");
    if sampled {
        columns.extend(["sigma", "shots"]);
    }
    columns.extend(["fidelity", "probability"]);
    if sampled {
        columns.extend(["fidelity_se", "probability_se"]);
    }
    columns.extend(["closed_fidelity", "closed_probability"]);
    if with_limits {
        columns.extend(["fidelity_limit", "probability_limit"]);
    }
    columns.push("discrepancy");

    let mut points = Vec::new();
    for &n in &args.n.0 {
        for &e in &eta_axis {
            points.extend(noise_axis.iter().map(|&x| (n, e, x)));
        }
    }
    let rows = par_rows(points, |(n, eta, x)| {
        let (noise, k) = if sampled {
            let dist = PhaseDistribution::gaussian(x)?;
            let k = crate::phase_noise::kappa(&dist)?;
            (Noise::Sampled { dist, shots: args.shots, seed }, k)
        } else {
            let k = kappa(x)?;
            (Noise::Exact(k), k)
        };
        let config = ProtocolConfig { n_branches: n, noise, symmetric, eta, interferometer: kind };
        let r = filtration::run(&config)?;
        let mut row: Vec<Value> = vec![n.into()];
        if etas.is_some() {
            row.push(eta.into());
        }
        row.push(k.re().into());
        if sampled {
            row.extend([x.into(), args.shots.into()]);
        }
        row.extend([r.fidelity.into(), r.probability.into()]);
        if let Some((sf, sp)) = r.standard_error {
            row.extend([sf.into(), sp.into()]);
        }
        row.extend([r.closed_fidelity.into(), r.closed_probability.into()]);
        if with_limits {
            let (fl, pl) = if symmetric {
                closed_symmetric_limit(k)
            } else {
                (closed_fidelity_single_rail_limit(k), closed_probability_single_rail_limit(k))
            };
            row.extend([fl.into(), pl.into()]);
        }
        row.push(r.discrepancy.into());
        Ok(row)
    })?;
    Ok(Table::new(columns, rows))
}

fn coherent_table(args: &CoherentArgs, seed: u64) -> CliResult<Table> {
    let points: Vec<(usize, f64)> =
        args.n.0.iter().flat_map(|&n| args.sigma.0.iter().map(move |&s| (n, s))).collect();
    let rows = par_rows(points, |(n, sigma)| {
        let mc = CoherentMethod::MonteCarlo { samples: args.samples, seed };
        let (method, name) = match args.method {
            CoherentMethodArg::Quadrature => (CoherentMethod::Quadrature, "quadrature"),
            CoherentMethodArg::MonteCarlo => (mc, "monte-carlo"),
            CoherentMethodArg::Auto if n <= 2 => (CoherentMethod::Quadrature, "quadrature"),
            CoherentMethodArg::Auto => (mc, "monte-carlo"),
        };
        let config = CoherentConfig {
            alpha_sq: args.alpha_sq,
            n_branches: n,
            dist: PhaseDistribution::gaussian(sigma)?,
            method,
        };
        let est = coherent::fidelity(&config)?;
        Ok(vec![
            n.into(),
            sigma.into(),
            args.alpha_sq.into(),
            Value::Text(name.into()),
            est.value.into(),
            est.standard_error.into(),
            est.samples.into(),
        ])
    })?;
    Ok(Table::new(vec!["n", "sigma", "alpha_sq", "method", "fidelity", "fidelity_se", "samples"], rows))
}

fn stellar_table(args: &StellarArgs, seed: u64) -> CliResult<Table> {
    let kind = args.device.kind(seed);
    let mut points = Vec::new();
    for &n in &args.n.0 {
        for &g in &args.gamma.0 {
            for &p in &args.p.0 {
                for &k in &args.kappa.0 {
                    points.push(StellarQfiParams { n_branches: n, kappa: k, gamma: g, phi: args.phi, dark_count: p });
                }
            }
        }
    }
    let rows = par_rows(points, |params| {
        let s = StellarScenario { params, interferometer: kind };
        let q = stellar::stellar_qfi(&s)?;
        let (cp, cg) = closed_j_dark(&params);
        let (lp, lg) = closed_j_dark_limit(&params);
        let prob = stellar::signal_probability(&s)?;
        let mut disc = rel(q.j_phi(), cp);
        if cg.is_finite() {
            disc = disc.max(rel(q.j_gamma(), cg));
        }
        Ok(vec![
            params.n_branches.into(),
            params.gamma.into(),
            params.phi.into(),
            params.dark_count.into(),
            params.kappa.into(),
            q.j_phi().into(),
            q.j_gamma().into(),
            q.matrix[(0, 1)].into(),
            cp.into(),
            cg.into(),
            lp.into(),
            lg.into(),
            prob.into(),
            disc.into(),
        ])
    })?;
    Ok(Table::new(
        vec![
            "n", "gamma", "phi", "dark_count", "kappa", "j_phi", "j_gamma", "j_phi_gamma", "closed_j_phi",
            "closed_j_gamma", "limit_j_phi", "limit_j_gamma", "probability", "discrepancy",
        ],
        rows,
    ))
}

fn dark_count_table(args: &DarkCountArgs) -> CliResult<Table> {
    let mut points = Vec::new();
    for &n in &args.n.0 {
        for &g in &args.gamma.0 {
            for &p in &args.p.0 {
                for &k in &args.kappa.0 {
                    points.push(StellarQfiParams { n_branches: n, kappa: k, gamma: g, phi: args.phi, dark_count: p });
                }
            }
        }
    }
    let rows = par_rows(points, |params| {
        let s = StellarScenario::ideal(params).with_interferometer(InterferometerKind::EvenSplitter);
        let full = stellar::stellar_qfi(&s)?;
        let out = stellar::run_pipeline(&s)?;
        let block = stellar::block_qfi(&out.block, &params)?;
        let (cp, cg) = closed_j_dark(&params);
        let (lp, lg) = closed_j_dark_limit(&params);
        let mut disc = rel(full.j_phi(), cp).max(rel(block.j_phi(), cp));
        if cg.is_finite() {
            disc = disc.max(rel(full.j_gamma(), cg)).max(rel(block.j_gamma(), cg));
        }
        Ok(vec![
            params.n_branches.into(),
            params.gamma.into(),
            params.dark_count.into(),
            params.kappa.into(),
            full.j_phi().into(),
            full.j_gamma().into(),
            block.j_phi().into(),
            block.j_gamma().into(),
            cp.into(),
            cg.into(),
            lp.into(),
            lg.into(),
            disc.into(),
        ])
    })?;
    Ok(Table::new(
        vec![
            "n", "gamma", "dark_count", "kappa", "j_phi", "j_gamma", "block_j_phi", "block_j_gamma",
            "closed_j_phi", "closed_j_gamma", "limit_j_phi", "limit_j_gamma", "discrepancy",
        ],
        rows,
    ))
}

fn imperfection_table(args: &ImperfectionArgs, seed: u64) -> CliResult<Table> {
    let mut rows = Vec::new();
    let sqrt_runs = (args.runs as f64).sqrt();
    for &g in &args.gamma.0 {
        let study = ImperfectionStudy {
            phi: args.phi,
            matched: !args.mismatched,
            ..ImperfectionStudy::new(args.n, args.sigma_r, args.runs, seed, g)
        };
        for r in study.run(&args.kappa.0)? {
            rows.push(vec![
                args.n.into(),
                args.sigma_r.into(),
                args.runs.into(),
                g.into(),
                r.kappa.into(),
                r.mean_j_phi.into(),
                r.std_j_phi.into(),
                (r.std_j_phi / sqrt_runs).into(),
                r.mean_j_gamma.into(),
                r.std_j_gamma.into(),
                (r.std_j_gamma / sqrt_runs).into(),
                r.ideal_j_phi.into(),
                r.ideal_j_gamma.into(),
                rel_dev(r.mean_j_phi, r.ideal_j_phi).into(),
                rel_dev(r.mean_j_gamma, r.ideal_j_gamma).into(),
            ]);
        }
    }
    Ok(Table::new(
        vec![
            "n", "sigma_r", "runs", "gamma", "kappa", "mean_j_phi", "std_j_phi", "se_j_phi", "mean_j_gamma",
            "std_j_gamma", "se_j_gamma", "ideal_j_phi", "ideal_j_gamma", "rel_dev_j_phi", "rel_dev_j_gamma",
        ],
        rows,
    ))
}

/// `|mean − ideal| / ideal`, zero when both vanish.
fn rel_dev(mean: f64, ideal: f64) -> f64 {
    if mean == ideal {
        0.0
    } else {
        (mean - ideal).abs() / ideal.abs()
    }
}

struct Check {
    name: &'static str,
    tolerance: f64,
    run: fn() -> CliResult<f64>,
}

const KAPPAS: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

fn check_single_rail() -> CliResult<f64> {
    let mut worst: f64 = 0.0;
    for n in 1..=16 {
        for kind in [InterferometerKind::Fourier, InterferometerKind::EvenSplitter] {
            for k in KAPPAS {
                let r = filtration::run(&ProtocolConfig::exact(n, kappa(k)?).with_interferometer(kind))?;
                worst = worst.max(r.discrepancy.unwrap_or(f64::INFINITY));
            }
        }
    }
    Ok(worst)
}

fn check_symmetric() -> CliResult<f64> {
    let mut worst: f64 = 0.0;
    for n in [1, 2, 3, 4, 8, 10, 16] {
        for k in KAPPAS {
            let r = filtration::run(&ProtocolConfig::exact(n, kappa(k)?).symmetric())?;
            worst = worst.max(r.discrepancy.unwrap_or(f64::INFINITY));
        }
    }
    Ok(worst)
}

fn check_lossy() -> CliResult<f64> {
    let mut worst: f64 = 0.0;
    for n in [1, 2, 5, 10] {
        for eta in [0.25, 0.5, 0.75, 1.0] {
            for k in KAPPAS {
                let r = filtration::run(&ProtocolConfig::exact(n, kappa(k)?).with_eta(eta))?;
                worst = worst.max(r.discrepancy.unwrap_or(f64::INFINITY));
            }
        }
    }
    Ok(worst)
}

fn check_device_equivalence() -> CliResult<f64> {
    let mut worst: f64 = 0.0;
    for n in 1..=8 {
        for k in KAPPAS {
            let cfg = ProtocolConfig::exact(n, kappa(k)?);
            let a = filtration::run(&cfg)?;
            let b = filtration::run(&cfg.clone().with_interferometer(InterferometerKind::EvenSplitter))?;
            worst = worst.max((a.fidelity - b.fidelity).abs()).max((a.probability - b.probability).abs());
            let p = StellarQfiParams::new(n, k, 0.8);
            let qa = stellar::stellar_qfi(&StellarScenario::ideal(p))?;
            let qb = stellar::stellar_qfi(&StellarScenario::ideal(p).with_interferometer(InterferometerKind::EvenSplitter))?;
            worst = worst.max((qa.matrix - qb.matrix).abs().max());
        }
    }
    Ok(worst)
}

fn check_unitarity() -> CliResult<f64> {
    let mut worst: f64 = 0.0;
    for n in 1..=16 {
        worst = worst.max(fourier(n)?.unitarity_error()).max(even_splitter(n)?.unitarity_error());
    }
    Ok(worst)
}

fn check_stellar_qfi() -> CliResult<f64> {
    let mut worst: f64 = 0.0;
    for n in [1, 2, 4, 10] {
        for k in &KAPPAS[1..] {
            for g in [0.0, 0.5, 0.8, 0.95, 1.0] {
                let p = StellarQfiParams::new(n, *k, g);
                let q = stellar::stellar_qfi(&StellarScenario::ideal(p))?;
                let (cp, cg) = closed_j_dark(&p);
                worst = worst.max(rel(q.j_phi(), cp));
                if g < 1.0 && cg.is_finite() {
                    worst = worst.max(rel(q.j_gamma(), cg));
                }
            }
        }
    }
    Ok(worst)
}

fn check_dark_counts() -> CliResult<f64> {
    let mut worst: f64 = 0.0;
    for n in [2, 10] {
        for p in [0.001, 0.01, 0.1] {
            for k in &KAPPAS[1..] {
                for g in [0.5, 0.8, 0.95] {
                    let params = StellarQfiParams::new(n, *k, g).with_dark_count(p);
                    let q = stellar::stellar_qfi(&StellarScenario::ideal(params))?;
                    let (cp, cg) = closed_j_dark(&params);
                    worst = worst.max(rel(q.j_phi(), cp)).max(rel(q.j_gamma(), cg));
                }
            }
        }
    }
    Ok(worst)
}

const CHECKS: [Check; 7] = [
    Check { name: "single-rail closed form", tolerance: 1e-10, run: check_single_rail },
    Check { name: "symmetric closed form", tolerance: 1e-10, run: check_symmetric },
    Check { name: "lossy closed form", tolerance: 1e-10, run: check_lossy },
    Check { name: "fourier vs even splitter", tolerance: 1e-10, run: check_device_equivalence },
    Check { name: "interferometer unitarity", tolerance: 1e-12, run: check_unitarity },
    Check { name: "stellar qfi closed form", tolerance: 1e-8, run: check_stellar_qfi },
    Check { name: "dark-count qfi closed form", tolerance: 1e-8, run: check_dark_counts },
];

fn validate_table() -> CliResult<Table> {
    let results: Vec<(f64, &Check)> =
        CHECKS.par_iter().map(|c| Ok(((c.run)()?, c))).collect::<CliResult<_>>()?;
    let mut failures = Vec::new();
    let rows = results
        .iter()
        .map(|(worst, c)| {
            let ok = *worst <= c.tolerance;
            if !ok {
                failures.push(c.name.to_string());
            }
            vec![Value::Text(c.name.into()), (*worst).into(), c.tolerance.into(), Value::Text(ok.to_string())]
        })
        .collect();
    Ok(Table { columns: vec!["check", "max_discrepancy", "tolerance", "passed"], rows, failures })
}

fn figure_command(id: FigureId) -> CliResult<Command> {
    let argv = std::iter::once("errfilt").chain(id.argv().iter().copied());
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Spec(e.to_string()))?;
    cli.command.ok_or_else(|| CliError::Spec("figure without command".into()))
}

/// Evaluates a sweep.
pub fn run(spec: &SweepSpec) -> CliResult<Table> {
    let seed = spec.seed;
    match &spec.command {
        Command::FidelitySingle(a) => filtration_table(a, None, false, seed),
        Command::FidelitySymmetric(a) => filtration_table(a, None, true, seed),
        Command::FidelityLossy(a) => filtration_table(&a.base, Some(&a.eta), false, seed),
        Command::FidelityCoherent(a) => coherent_table(a, seed),
        Command::QfiStellar(a) => stellar_table(a, seed),
        Command::ImperfectionStudy(a) => imperfection_table(a, seed),
        Command::DarkCountStudy(a) => dark_count_table(a),
        Command::Validate => validate_table(),
        Command::Figure { id } => run(&SweepSpec { command: figure_command(*id)?, ..spec.clone() }),
    }
}

/// CSV with `#` metadata lines.
pub fn write_table<W: Write>(table: &Table, spec: &SweepSpec, out: W) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    let mut out = out;
    writeln!(out, "# errfilt {}", env!("CARGO_PKG_VERSION")).map_err(io)?;
    writeln!(out, "# spec: {:?}", spec.command).map_err(io)?;
    writeln!(out, "# seed: {}", spec.seed).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Value::render)).map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

fn toml_scalar(v: &toml::Value) -> CliResult<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Array(items) => Ok(items.iter().map(toml_scalar).collect::<CliResult<Vec<_>>>()?.join(",")),
        other => Err(CliError::Spec(format!("unsupported config value {other}"))),
    }
}

/// Turns a TOML config into the equivalent argument vector.
pub fn config_to_args(text: &str) -> CliResult<Vec<String>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Spec(e.to_string()))?;
    let mut globals = Vec::new();
    let mut flags = Vec::new();
    let mut command = None;
    let mut id = None;
    for (key, value) in &table {
        let flag = format!("--{}", key.replace('_', "-"));
        let target = match key.as_str() {
            "command" => {
                command = Some(toml_scalar(value)?);
                continue;
            }
            "id" => {
                id = Some(toml_scalar(value)?);
                continue;
            }
            "config" => return Err(CliError::Spec("config files cannot nest".into())),
            "seed" | "out" | "format" | "threads" => &mut globals,
            _ => &mut flags,
        };
        match value {
            toml::Value::Boolean(true) => target.push(flag),
            toml::Value::Boolean(false) => {}
            v => {
                target.push(flag);
                target.push(toml_scalar(v)?);
            }
        }
    }
    let command = command.ok_or_else(|| CliError::Spec("config needs a `command` key".into()))?;
    let mut argv = vec!["errfilt".to_string()];
    argv.extend(globals);
    argv.push(command);
    argv.extend(id);
    argv.extend(flags);
    Ok(argv)
}

/// Output destination and worker count, which never change the output bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub spec: SweepSpec,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

fn parse(args: Vec<OsString>) -> CliResult<std::result::Result<Execution, String>> {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(Err(e.to_string())),
                _ => Err(CliError::Spec(e.to_string())),
            };
        }
    };
    let cli = match &cli.config {
        None => cli,
        Some(path) => {
            if cli.command.is_some() {
                return Err(CliError::Spec("give either a subcommand or --config, not both".into()));
            }
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let base = Cli::try_parse_from(config_to_args(&text)?).map_err(|e| CliError::Spec(e.to_string()))?;
            Cli {
                config: None,
                seed: cli.seed.or(base.seed),
                out: cli.out.or(base.out),
                format: cli.format.or(base.format),
                threads: cli.threads.or(base.threads),
                command: base.command,
            }
        }
    };
    let command = cli.command.ok_or_else(|| CliError::Spec("no command given (see --help)".into()))?;
    Ok(Ok(Execution {
        spec: SweepSpec { command, seed: cli.seed.unwrap_or(0), format: cli.format.unwrap_or(Format::Csv) },
        out: cli.out,
        threads: cli.threads,
    }))
}

fn execute(exec: &Execution) -> CliResult<()> {
    let table = match exec.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Spec(format!("thread pool: {e}")))?
            .install(|| run(&exec.spec))?,
        None => run(&exec.spec)?,
    };
    match &exec.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            write_table(&table, &exec.spec, std::io::BufWriter::new(file))?;
        }
        None => write_table(&table, &exec.spec, std::io::stdout().lock())?,
    }
    if table.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(table.failures.join(", ")))
    }
}

/// Parses, runs and writes; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let result = parse(args).and_then(|parsed| match parsed {
        Ok(exec) => execute(&exec),
        Err(text) => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("errfilt: {e}");
            e.exit_code()
        }
    }
}
