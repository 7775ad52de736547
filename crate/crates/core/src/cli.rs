//! Command-line driver.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O or parse, 3 numerical (tracking,
//! contour proximity, non-finite results), 4 mode restriction.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::calculus::{apply_phi_contour, apply_phi_spectral, contour_symbol, spectral_symbol, verify_covariance, PhiSpec, RegionSelector};
use crate::error::Error;
use crate::io::{to_json_string, write_atomic};
use crate::kernel::KernelSequence;
use crate::learn::{fit, Dataset, Family, Objective, Pair};
use crate::linalg::CVector;
use crate::product::{compare_analyses, product_generator, ComparisonReport};
use crate::signal::Signal;
use crate::spectral::{detect_regions, spectrum_locus, track_branches, BranchSet, RegionSet};
use crate::transform::{output_window, symbol, FrequencyGrid, Window};

#[derive(Debug, Parser)]
#[command(name = "covgraph", version, about = "Covariant filters for time-varying signals on directed graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track eigenvalue branches and detect separable regions.
    Spectrum(SpectrumArgs),
    /// Apply a filter φ(S) to a signal.
    Apply(ApplyArgs),
    /// Compare a generator with its Cartesian-product baseline.
    Compare(CompareArgs),
    /// Fit filter parameters to input/output pairs.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Kernel JSON file.
    #[arg(long)]
    pub kernel: PathBuf,
    /// Number of frequency grid points (power of two, at least 8).
    #[arg(long = "grid", default_value_t = 256)]
    pub grid: usize,
    /// Tube half-width used to separate spectral regions.
    #[arg(long, default_value_t = 0.02)]
    pub delta: f64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: Common,
    /// Analyze the Cartesian-product baseline of the kernel instead.
    #[arg(long)]
    pub product: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Spectral,
    Contour,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Filter JSON file.
    #[arg(long)]
    pub phi: PathBuf,
    /// Input signal JSON file.
    #[arg(long)]
    pub signal: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Spectral)]
    pub mode: Mode,
    /// Contour quadrature nodes (16, 32, 64 or 128).
    #[arg(long, default_value_t = 64)]
    pub quadrature: usize,
    /// Output window as START:LEN; defaults to the exact support for
    /// polynomial filters and a grid-length window centred on the input
    /// otherwise.
    #[arg(long)]
    pub window: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    /// poly:DEGREE, gaussian, or gaussian-pair:SIGMA.
    #[arg(long)]
    pub family: String,
    /// Region of poly and gaussian families: all, cluster:K or disc:RE:IM:R.
    #[arg(long)]
    pub region: Option<String>,
    /// Regions of the two gaussian-pair pieces.
    #[arg(long, default_value = "cluster:0")]
    pub region_plus: String,
    #[arg(long, default_value = "cluster:1")]
    pub region_minus: String,
    /// Dataset JSON file.
    #[arg(long, conflicts_with = "synthesize", required_unless_present = "synthesize")]
    pub dataset: Option<PathBuf>,
    /// Generate the dataset from these parameters (comma-separated reals;
    /// `lambda:K@W` stands for the real and imaginary parts of branch K at
    /// grid frequency W).
    #[arg(long)]
    pub synthesize: Option<String>,
    /// Number of synthesized pairs.
    #[arg(long, default_value_t = 16)]
    pub pairs: usize,
    /// Seed of the ChaCha8 generator used for synthesized inputs.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial parameters, same syntax as --synthesize; zeros for poly.
    #[arg(long)]
    pub init: Option<String>,
    /// Maximum optimizer iterations.
    #[arg(long, default_value_t = 500)]
    pub budget: usize,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError { code: 2, message: format!("{}: {err}", path.display()) }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::Io(_) | Error::Json(_) => 2,
            Error::EigenSolverFailed
            | Error::EigenvalueOnContour { .. }
            | Error::EmptyContour
            | Error::SingularResolvent(_)
            | Error::ContourTooClose { .. }
            | Error::TrackingFailure { .. }
            | Error::BranchCountChanged { .. }
            | Error::NonFiniteMultiplier { .. }
            | Error::NonFiniteLoss => 3,
            Error::NonHolomorphic(_) | Error::MissingDerivative { .. } => 4,
            _ => 1,
        };
        CliError { code, message: err.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn execute(command: &Command) -> CliResult<()> {
    match command {
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Apply(a) => cmd_apply(a).map(|norm| println!("commutator_norm {}", crate::io::format_f64(norm))),
        Command::Compare(a) => cmd_compare(a).map(|_| ()),
        Command::Fit(a) => cmd_fit(a).map(|_| ()),
    }
}

fn check_common(c: &Common) -> CliResult<FrequencyGrid> {
    if c.grid < 8 || !c.grid.is_power_of_two() {
        return Err(CliError::usage(format!("--grid must be a power of two at least 8, got {}", c.grid)));
    }
    if c.delta <= 0.0 || !c.delta.is_finite() {
        return Err(CliError::usage(format!("--delta must be positive, got {}", c.delta)));
    }
    fs::create_dir_all(&c.out).map_err(|e| CliError::io(&c.out, e))?;
    Ok(FrequencyGrid::new(c.grid)?)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = to_json_string(value)?;
    write_atomic(path, text.as_bytes()).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_atomic(path, text.as_bytes()).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Serialize)]
struct RegionsFile {
    grid: usize,
    delta: f64,
    branch_count: usize,
    cluster_count: usize,
    clusters: Vec<Vec<usize>>,
    separation: Option<f64>,
    monodromy: Vec<usize>,
    ambiguous_points: Vec<usize>,
}

fn regions_file(bs: &BranchSet, regions: &RegionSet) -> RegionsFile {
    RegionsFile {
        grid: bs.grid().len(),
        delta: regions.delta(),
        branch_count: bs.branch_count(),
        cluster_count: regions.cluster_count(),
        clusters: regions.clusters().to_vec(),
        separation: regions.separation(),
        monodromy: bs.monodromy().to_vec(),
        ambiguous_points: bs.ambiguous_points().to_vec(),
    }
}

fn pipeline(k: &KernelSequence, grid: FrequencyGrid, delta: f64) -> CliResult<(BranchSet, RegionSet)> {
    let bs = track_branches(&symbol(k, grid), None)?;
    let regions = detect_regions(&spectrum_locus(&bs), delta)?;
    Ok((bs, regions))
}

/// Writes `spectrum.csv` and `regions.json`.
pub fn cmd_spectrum(a: &SpectrumArgs) -> CliResult<()> {
    let grid = check_common(&a.common)?;
    let mut k: KernelSequence = read_json(&a.common.kernel)?;
    if a.product {
        k = product_generator(&k);
    }
    let (bs, regions) = pipeline(&k, grid, a.common.delta)?;
    write_text(&a.common.out.join("spectrum.csv"), &spectrum_locus(&bs).to_csv())?;
    write_json(&a.common.out.join("regions.json"), &regions_file(&bs, &regions))
}

fn parse_window(text: &str) -> CliResult<Window> {
    let bad = || CliError::usage(format!("--window expects START:LEN, got '{text}'"));
    let (start, len) = text.split_once(':').ok_or_else(bad)?;
    Ok(Window::new(start.trim().parse().map_err(|_| bad())?, len.trim().parse().map_err(|_| bad())?))
}

/// Window holding the exact output of a polynomial filter, or a grid-length
/// window centred on the input.
fn default_window(k: &KernelSequence, phi: &PhiSpec, x: &Signal, grid: FrequencyGrid) -> Window {
    match phi.polynomial_degree() {
        Some(d) => output_window(&k.power(d), x),
        None => {
            let m = grid.len();
            let pad = m.saturating_sub(x.len()) / 2;
            Window::new(x.start() - pad as i64, m)
        }
    }
}

/// Writes `output.json` and returns the commutator norm of the filter with
/// the generator.
pub fn cmd_apply(a: &ApplyArgs) -> CliResult<f64> {
    let grid = check_common(&a.common)?;
    if ![16, 32, 64, 128].contains(&a.quadrature) {
        return Err(CliError::usage(format!("--quadrature must be 16, 32, 64 or 128, got {}", a.quadrature)));
    }
    let k: KernelSequence = read_json(&a.common.kernel)?;
    let phi: PhiSpec = read_json(&a.phi)?;
    let x: Signal = read_json(&a.signal)?;
    if x.n() != k.n() {
        return Err(CliError::usage(format!("signal has {} nodes, kernel has {}", x.n(), k.n())));
    }
    let window = match &a.window {
        Some(w) => parse_window(w)?,
        None => default_window(&k, &phi, &x, grid),
    };
    if window.len > grid.len() {
        return Err(Error::Aliasing { grid: grid.len(), length: window.len }.into());
    }
    let table = symbol(&k, grid);
    let needs_regions = phi.pieces().iter().any(|p| matches!(p.region, RegionSelector::Cluster(_)));
    let (y, a_table) = match a.mode {
        Mode::Spectral => {
            let (bs, regions) = pipeline(&k, grid, a.common.delta)?;
            let r = needs_regions.then_some(&regions);
            (apply_phi_spectral(&bs, r, &phi, &x, window)?, spectral_symbol(&bs, r, &phi)?)
        }
        Mode::Contour => {
            let analysis = if needs_regions { Some(pipeline(&k, grid, a.common.delta)?) } else { None };
            let clusters = analysis.as_ref().map(|(bs, r)| (bs, r));
            (
                apply_phi_contour(&table, &phi, a.quadrature, &x, window, clusters)?,
                contour_symbol(&table, &phi, a.quadrature, clusters)?,
            )
        }
    };
    let norm = verify_covariance(&a_table, &table)?;
    write_json(&a.common.out.join("output.json"), &y)?;
    Ok(norm)
}

/// Writes `report.json`, `spectrum_generator.csv` and `spectrum_product.csv`.
pub fn cmd_compare(a: &CompareArgs) -> CliResult<ComparisonReport> {
    let grid = check_common(&a.common)?;
    let k: KernelSequence = read_json(&a.common.kernel)?;
    let (generator, product) = compare_analyses(&k, grid, a.common.delta)?;
    let report = ComparisonReport {
        grid: grid.len(),
        delta: a.common.delta,
        generator: generator.summary(),
        product: product.summary(),
    };
    write_text(&a.common.out.join("spectrum_generator.csv"), &generator.locus.to_csv())?;
    write_text(&a.common.out.join("spectrum_product.csv"), &product.locus.to_csv())?;
    write_json(&a.common.out.join("report.json"), &report)?;
    Ok(report)
}

fn parse_region(text: &str) -> CliResult<RegionSelector> {
    let bad = || CliError::usage(format!("unknown region '{text}'; use all, cluster:K or disc:RE:IM:R"));
    if text == "all" {
        return Ok(RegionSelector::All);
    }
    if let Some(c) = text.strip_prefix("cluster:") {
        return c.parse().map(RegionSelector::Cluster).map_err(|_| bad());
    }
    if let Some(d) = text.strip_prefix("disc:") {
        let v: Vec<f64> = d.split(':').map(|s| s.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        if let [re, im, r] = v[..] {
            return Ok(RegionSelector::Disc { center: Complex64::new(re, im), radius: r });
        }
    }
    Err(bad())
}

fn parse_family(a: &FitArgs) -> CliResult<Family> {
    let region = |default: &str| parse_region(a.region.as_deref().unwrap_or(default));
    if a.family == "gaussian" {
        return Ok(Family::Gaussian { region: region("cluster:0")? });
    }
    if let Some(d) = a.family.strip_prefix("poly:") {
        let degree = d.parse().map_err(|_| CliError::usage(format!("bad polynomial degree '{d}'")))?;
        return Ok(Family::Polynomial { degree, region: region("all")? });
    }
    if let Some(s) = a.family.strip_prefix("gaussian-pair:") {
        let sigma: f64 = s.parse().map_err(|_| CliError::usage(format!("bad gaussian width '{s}'")))?;
        if sigma.is_nan() || sigma <= 0.0 {
            return Err(CliError::usage("gaussian width must be positive"));
        }
        return Ok(Family::GaussianPair {
            sigma,
            plus: parse_region(&a.region_plus)?,
            minus: parse_region(&a.region_minus)?,
        });
    }
    Err(CliError::usage(format!("unknown family '{}'; use poly:D, gaussian or gaussian-pair:SIGMA", a.family)))
}

/// Comma-separated reals; `lambda:K@W` expands to `re, im` of branch `K` at
/// grid frequency `W`.
fn parse_theta(text: &str, bs: &BranchSet) -> CliResult<Vec<f64>> {
    let mut out = Vec::new();
    for token in text.split(',').map(str::trim) {
        if let Some(rest) = token.strip_prefix("lambda:") {
            let bad = || CliError::usage(format!("expected lambda:K@W, got '{token}'"));
            let (k, w) = rest.split_once('@').ok_or_else(bad)?;
            let k: usize = k.parse().map_err(|_| bad())?;
            let w: f64 = w.parse().map_err(|_| bad())?;
            bs.check_branch(k)?;
            let j = bs.grid().index_of(w).ok_or(Error::OffGrid(w))?;
            let l = bs.eigenvalue(k, j);
            out.extend([l.re, l.im]);
        } else {
            out.push(token.parse().map_err(|_| CliError::usage(format!("bad parameter '{token}'")))?);
        }
    }
    Ok(out)
}

const SYNTHETIC_INPUT_LEN: usize = 8;

/// Inputs with i.i.d. standard complex normal entries on `[0, 8)`; targets
/// from the filter with parameters `theta` on a window padded by `M/8` on
/// each side (or the exact support for polynomial families).
fn synthesize(
    k: &KernelSequence,
    bs: &BranchSet,
    regions: &RegionSet,
    family: &Family,
    theta: &[f64],
    pairs: usize,
    seed: u64,
) -> CliResult<Dataset> {
    let phi = family.phi(theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = bs.grid().len();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let samples = (0..SYNTHETIC_INPUT_LEN)
            .map(|_| {
                CVector::from_fn(k.n(), |_, _| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re * scale, im * scale)
                })
            })
            .collect();
        let x = Signal::new(k.n(), 0, samples)?;
        let window = match phi.polynomial_degree() {
            Some(d) => output_window(&k.power(d), &x),
            None => {
                let len = (SYNTHETIC_INPUT_LEN + m / 4).min(m);
                Window::new(-(((len - SYNTHETIC_INPUT_LEN) / 2) as i64), len)
            }
        };
        let y = apply_phi_spectral(bs, Some(regions), &phi, &x, window)?;
        out.push(Pair { x, y });
    }
    Ok(Dataset::new(out)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub family: String,
    pub grid: usize,
    pub delta: f64,
    pub seed: Option<u64>,
    pub pairs: usize,
    pub theta: Vec<f64>,
    pub loss: f64,
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Writes `fit.json`, and `dataset.json` when the data are synthesized.
pub fn cmd_fit(a: &FitArgs) -> CliResult<FitReport> {
    let grid = check_common(&a.common)?;
    if a.budget == 0 {
        return Err(CliError::usage("--budget must be at least 1"));
    }
    if a.pairs == 0 {
        return Err(CliError::usage("--pairs must be at least 1"));
    }
    let family = parse_family(a)?;
    let k: KernelSequence = read_json(&a.common.kernel)?;
    let (bs, regions) = pipeline(&k, grid, a.common.delta)?;
    let (data, seed) = match (&a.dataset, &a.synthesize) {
        (Some(path), _) => (read_json::<Dataset>(path)?, None),
        (None, Some(theta)) => {
            let theta = parse_theta(theta, &bs)?;
            let data = synthesize(&k, &bs, &regions, &family, &theta, a.pairs, a.seed)?;
            write_json(&a.common.out.join("dataset.json"), &data)?;
            (data, Some(a.seed))
        }
        (None, None) => return Err(CliError::usage("one of --dataset or --synthesize is required")),
    };
    let init = match (&a.init, &family) {
        (Some(t), _) => parse_theta(t, &bs)?,
        (None, Family::Polynomial { .. }) => vec![0.0; family.param_count()],
        (None, _) => return Err(CliError::usage("--init is required for gaussian families")),
    };
    if init.len() != family.param_count() {
        return Err(CliError::usage(format!(
            "--init has {} values, family '{}' takes {}",
            init.len(),
            a.family,
            family.param_count()
        )));
    }
    let objective = Objective::new(&bs, Some(&regions), family, &data)?;
    let res = fit(&objective, &init, a.budget)?;
    let report = FitReport {
        family: a.family.clone(),
        grid: grid.len(),
        delta: a.common.delta,
        seed,
        pairs: data.pairs.len(),
        theta: res.theta,
        loss: res.loss,
        trace: res.trace,
        converged: res.converged,
    };
    write_json(&a.common.out.join("fit.json"), &report)?;
    Ok(report)
}
