//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 density
//! iteration did not converge.

mod pixmap;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dynamics::{ComplexPoint, QuadraticMap};
use crate::ergodic::{reference_integral, run_experiment, sweep_csv, ExperimentConfig, ExperimentReport, TestFunction};
use crate::error::Error;
use crate::lattice::{borel_centers, find_repelling_fixed_point, make_lattice, BorelCover, Lattice};
use crate::selector::ObjectiveForm;
use crate::transfer::{
    density_cache, density_capped, estimate_dimension_with_probe, ConvergenceTable, DensityCache,
    DimensionEstimate, DEFAULT_LEVEL_CAP, DEFAULT_PROBE_DEPTH,
};

pub use pixmap::{render_cover, Bitmap};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;

pub const SAMPLE_SCHEMA: &str = "julia-conformal/sample-report";
pub const SCHEMA_VERSION: u32 = 1;

/// `re,im` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexArg(pub ComplexPoint);

impl FromStr for ComplexArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (re, im) = s
            .split_once(',')
            .ok_or_else(|| format!("expected \"re,im\", got {s:?}"))?;
        let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let z = ComplexPoint::new(parse(re)?, parse(im)?);
        if z.re.is_finite() && z.im.is_finite() {
            Ok(Self(z))
        } else {
            Err(format!("non-finite complex value {s:?}"))
        }
    }
}

/// A fixed exponent or `auto` for dimension estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HArg {
    Fixed(f64),
    Auto,
}

impl FromStr for HArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(HArg::Auto);
        }
        match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(HArg::Fixed(h)),
            _ => Err(format!("h must be a positive number or \"auto\", got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Conformal,
    Shifted,
    Appendix,
}

impl From<FormArg> for ObjectiveForm {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::Conformal => ObjectiveForm::Conformal,
            FormArg::Shifted => ObjectiveForm::Shifted,
            FormArg::Appendix => ObjectiveForm::Appendix,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "julia-conformal", version, about = "Pseudo-generic points on Julia sets of z^2 + c")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the Hausdorff dimension h by bisection on the density ratio.
    Dim(DimArgs),
    /// Write the ball cover (and optionally one lattice) as CSV and a bitmap.
    Cover(CoverArgs),
    /// Evaluate the transfer-operator density at a point.
    Density(DensityArgs),
    /// Full pipeline: dimension, cover, densities, alpha trials, report.
    Sample(SampleArgs),
    /// Repeat `sample` over a list of values of one parameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MapArgs {
    /// Map parameter c as "re,im".
    #[arg(long, default_value = "0.125,0", allow_hyphen_values = true)]
    pub c: ComplexArg,
}

#[derive(Debug, Clone, Args)]
pub struct BracketArgs {
    #[arg(long = "h-lo", default_value_t = 0.5)]
    pub h_lo: f64,
    #[arg(long = "h-hi", default_value_t = 1.99)]
    pub h_hi: f64,
    #[arg(long = "tol-h", default_value_t = 1e-4)]
    pub tol_h: f64,
    /// Level at which the ratio f_n / f_(n-1) is compared with 1.
    #[arg(long, default_value_t = DEFAULT_PROBE_DEPTH)]
    pub probe: usize,
}

#[derive(Debug, Args)]
pub struct DimArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[command(flatten)]
    pub bracket: BracketArgs,
    /// Write the convergence table (levels 1..probe at h_lo, h, h_hi) as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoverArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(short = 'm', long = "m", default_value_t = 8)]
    pub m_cover: u32,
    #[arg(long, default_value = "cover.csv")]
    pub csv: PathBuf,
    /// Bitmap of the stroked ball boundaries (PBM, P1).
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long, default_value_t = 800)]
    pub resolution: usize,
    /// Also build one lattice and write it here.
    #[arg(long = "lattice-csv")]
    pub lattice_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub ell: usize,
    #[arg(long = "N", default_value_t = 1000)]
    pub depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Evaluation point "re,im" (default: the repelling fixed point).
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<ComplexArg>,
    #[arg(long, default_value = "1.00735")]
    pub h: HArg,
    #[command(flatten)]
    pub bracket: BracketArgs,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_LEVEL_CAP)]
    pub cap: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(short = 'm', long = "m", default_value_t = 8)]
    pub m_cover: u32,
    #[arg(long, default_value_t = 100)]
    pub ell: usize,
    #[arg(long = "N", default_value_t = 32000)]
    pub depth: usize,
    #[arg(short = 'n', long = "n", default_value_t = 100)]
    pub n_sum: usize,
    #[arg(long, default_value_t = 30)]
    pub alpha: usize,
    #[arg(long, default_value = "1.00735")]
    pub h: HArg,
    #[command(flatten)]
    pub bracket: BracketArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "tol-density", default_value_t = 1e-4)]
    pub tol_density: f64,
    #[arg(long, value_enum, default_value_t = FormArg::Conformal)]
    pub form: FormArg,
    /// Test function: modulus, real, imag or modulus_squared.
    #[arg(long, default_value = "modulus")]
    pub g: String,
    /// Lengthen the sum until beta^2 / p^2 <= threshold (requires --p-max).
    #[arg(long, requires = "p_max")]
    pub threshold: Option<f64>,
    #[arg(long = "p-max", requires = "threshold")]
    pub p_max: Option<usize>,
    /// Include wall-clock time in the JSON report (breaks byte-reproducibility).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// JSON report path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// One-row parameter table (N,mu,sigma_e3,time).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Ell,
    #[value(name = "N")]
    Depth,
    #[value(name = "n")]
    NSum,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<usize>,
    /// CSV table path (stdout when omitted).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure tagged with the pipeline stage and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn stage(stage: &str, err: Error) -> Self {
        let code = match err.root() {
            Error::InvalidArgument(_) => EXIT_USAGE,
            Error::NonConvergence { .. } => EXIT_NO_CONVERGENCE,
            _ => EXIT_FAILURE,
        };
        Self {
            code,
            message: format!("{stage}: {err}"),
        }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: format!("cannot write {}: {err}", path.display()),
        }
    }
}

type CmdResult = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            let _ = writeln!(err, "error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            let _ = writeln!(err, "error: thread pool: {e}");
            return EXIT_FAILURE;
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Dim(a) => cmd_dim(a, out),
        Command::Cover(a) => cmd_cover(a, out),
        Command::Density(a) => cmd_density(a, out),
        Command::Sample(a) => cmd_sample(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn map_of(args: &MapArgs) -> Result<(QuadraticMap, ComplexPoint), Failure> {
    let map = QuadraticMap::new(args.c.0).map_err(|e| Failure::stage("map", e))?;
    let z0 = find_repelling_fixed_point(&map).map_err(|e| Failure::stage("fixed point", e))?;
    Ok((map, z0))
}

fn check_bracket(b: &BracketArgs) -> Result<(), Failure> {
    if !(b.h_lo > 0.0 && b.h_lo < b.h_hi) {
        return Err(Failure::usage(format!(
            "need 0 < --h-lo < --h-hi, got [{}, {}]",
            b.h_lo, b.h_hi
        )));
    }
    if !(b.tol_h > 0.0) {
        return Err(Failure::usage("--tol-h must be positive"));
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn dimension(map: &QuadraticMap, z0: ComplexPoint, b: &BracketArgs) -> Result<DimensionEstimate, Failure> {
    check_bracket(b)?;
    estimate_dimension_with_probe(map, z0, b.h_lo, b.h_hi, b.tol_h, b.probe).map_err(|e| Failure::stage("dimension", e))
}

fn cmd_dim(args: &DimArgs, out: &mut (dyn Write + Send)) -> CmdResult {
    let (map, z0) = map_of(&args.map)?;
    let est = dimension(&map, z0, &args.bracket)?;
    let table = ConvergenceTable::build(&map, z0, &[args.bracket.h_lo, est.h, args.bracket.h_hi], args.bracket.probe)
        .map_err(|e| Failure::stage("convergence table", e))?;
    let _ = writeln!(out, "h = {}", fmt17(est.h));
    let _ = writeln!(out, "bracket = [{}, {}]", fmt17(est.bracket.0), fmt17(est.bracket.1));
    let _ = write!(out, "{}", table.to_csv());
    if let Some(path) = &args.csv {
        write_file(path, &table.to_csv())?;
    }
    Ok(EXIT_OK)
}

/// `row,step,re,im` rows; cover centers are written as step 0.
pub fn cover_csv(cover: &BorelCover) -> String {
    let mut s = String::from("row,step,re,im\n");
    for (i, z) in cover.centers.iter().enumerate() {
        s.push_str(&format!("{i},0,{},{}\n", fmt17(z.re), fmt17(z.im)));
    }
    s
}

pub fn lattice_csv(lattice: &Lattice) -> String {
    let mut s = String::from("row,step,re,im\n");
    for (i, row) in lattice.rows().enumerate() {
        for (j, z) in row.iter().enumerate() {
            s.push_str(&format!("{i},{j},{},{}\n", fmt17(z.re), fmt17(z.im)));
        }
    }
    s
}

fn cmd_cover(args: &CoverArgs, out: &mut (dyn Write + Send)) -> CmdResult {
    let (map, z0) = map_of(&args.map)?;
    let cover = borel_centers(&map, z0, args.m_cover).map_err(|e| Failure::stage("cover", e))?;
    write_file(&args.csv, &cover_csv(&cover))?;
    let _ = writeln!(out, "{} centers, radius {} -> {}", cover.len(), fmt17(cover.radius), args.csv.display());
    if let Some(path) = &args.image {
        if args.resolution == 0 {
            return Err(Failure::usage("--resolution must be positive"));
        }
        let bitmap = render_cover(&cover.centers, cover.radius, args.resolution);
        write_file(path, &bitmap.to_pbm())?;
        let _ = writeln!(out, "image -> {}", path.display());
    }
    if let Some(path) = &args.lattice_csv {
        let lattice = make_lattice(&cover, args.ell, args.depth, args.seed).map_err(|e| Failure::stage("lattice", e))?;
        write_file(path, &lattice_csv(&lattice))?;
        let _ = writeln!(out, "lattice {}x{} -> {}", lattice.ell(), lattice.depth() + 1, path.display());
    }
    Ok(EXIT_OK)
}

fn resolve_h(
    h: HArg,
    map: &QuadraticMap,
    z0: ComplexPoint,
    bracket: &BracketArgs,
) -> Result<(f64, Option<DimensionEstimate>), Failure> {
    match h {
        HArg::Fixed(h) => Ok((h, None)),
        HArg::Auto => {
            let est = dimension(map, z0, bracket)?;
            Ok((est.h, Some(est)))
        }
    }
}

fn cmd_density(args: &DensityArgs, out: &mut (dyn Write + Send)) -> CmdResult {
    let (map, z0) = map_of(&args.map)?;
    let z = args.z.map_or(z0, |a| a.0);
    let (h, _) = resolve_h(args.h, &map, z0, &args.bracket)?;
    let result = density_capped(&map, z, h, args.tol, args.cap).map_err(|e| Failure::stage("density", e))?;
    let _ = writeln!(out, "n,f_n,ratio");
    for l in &result.levels {
        let _ = writeln!(out, "{},{},{}", l.n, fmt17(l.value), fmt17(l.ratio));
    }
    let _ = writeln!(out, "f = {}", fmt17(result.value));
    if result.converged {
        Ok(EXIT_OK)
    } else {
        Err(Failure::stage(
            "density",
            result.require_converged(z).expect_err("not converged"),
        ))
    }
}

struct Prepared {
    map: QuadraticMap,
    z0: ComplexPoint,
    h: f64,
    dimension: Option<DimensionEstimate>,
    cover: BorelCover,
    densities: DensityCache,
    g: TestFunction,
}

fn prepare(p: &PipelineArgs) -> Result<Prepared, Failure> {
    if p.ell == 0 || p.depth == 0 || p.n_sum == 0 || p.alpha == 0 {
        return Err(Failure::usage("--ell, --N, --n and --alpha must all be at least 1"));
    }
    if let Some(t) = p.threshold {
        if !(t >= 0.0) {
            return Err(Failure::usage("--threshold must be non-negative"));
        }
    }
    let g = TestFunction::builtin(&p.g).map_err(|e| Failure::usage(e.to_string()))?;
    let (map, z0) = map_of(&p.map)?;
    let (h, dimension) = resolve_h(p.h, &map, z0, &p.bracket)?;
    let cover = borel_centers(&map, z0, p.m_cover).map_err(|e| Failure::stage("cover", e))?;
    let densities = density_cache(&cover, h, p.tol_density).map_err(|e| Failure::stage("densities", e))?;
    Ok(Prepared {
        map,
        z0,
        h,
        dimension,
        cover,
        densities,
        g,
    })
}

fn experiment(prep: &Prepared, p: &PipelineArgs, ell: usize, depth: usize, n_sum: usize) -> Result<ExperimentReport, Failure> {
    let mut config = ExperimentConfig::new(&prep.cover, &prep.densities, ell, depth, n_sum);
    config.form = p.form.into();
    config.g = prep.g.clone();
    config.adaptive = p.threshold.zip(p.p_max);
    run_experiment(&config, p.alpha, p.seed).map_err(|e| Failure::stage("experiment", e))
}

#[derive(Serialize)]
struct SampleDocument<'a> {
    schema: &'static str,
    schema_version: u32,
    c: ComplexPoint,
    z0: ComplexPoint,
    h: f64,
    h_source: &'static str,
    dimension: Option<&'a DimensionEstimate>,
    reference_integral: f64,
    reports: Vec<&'a ExperimentReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    runtime_seconds: Option<f64>,
}

fn sample_json(prep: &Prepared, reports: &[&ExperimentReport], timing: Option<f64>) -> Result<String, Failure> {
    let reference = reference_integral(&prep.cover, &prep.g).map_err(|e| Failure::stage("reference integral", e))?;
    let doc = SampleDocument {
        schema: SAMPLE_SCHEMA,
        schema_version: SCHEMA_VERSION,
        c: prep.map.c(),
        z0: prep.z0,
        h: prep.h,
        h_source: if prep.dimension.is_some() { "auto" } else { "fixed" },
        dimension: prep.dimension.as_ref(),
        reference_integral: reference,
        reports: reports.to_vec(),
        runtime_seconds: timing,
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Failure {
        code: EXIT_FAILURE,
        message: format!("serialize report: {e}"),
    })?;
    text.push('\n');
    Ok(text)
}

fn emit(text: &str, path: Option<&PathBuf>, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            let _ = out.write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn cmd_sample(args: &SampleArgs, out: &mut (dyn Write + Send)) -> CmdResult {
    let started = Instant::now();
    let p = &args.pipeline;
    let prep = prepare(p)?;
    let report = experiment(&prep, p, p.ell, p.depth, p.n_sum)?;
    let timing = p.timing.then(|| started.elapsed().as_secs_f64());
    emit(&sample_json(&prep, &[&report], timing)?, args.out.as_ref(), out)?;
    if let Some(path) = &args.csv {
        write_file(path, &sweep_csv("N", &[(p.depth.to_string(), report.clone())]))?;
    }
    Ok(if report.incomplete { EXIT_FAILURE } else { EXIT_OK })
}

fn cmd_sweep(args: &SweepArgs, out: &mut (dyn Write + Send)) -> CmdResult {
    let started = Instant::now();
    let p = &args.pipeline;
    let prep = prepare(p)?;
    let mut rows = Vec::with_capacity(args.values.len());
    for &v in &args.values {
        let (ell, depth, n_sum) = match args.param {
            SweepParam::Ell => (v, p.depth, p.n_sum),
            SweepParam::Depth => (p.ell, v, p.n_sum),
            SweepParam::NSum => (p.ell, p.depth, v),
        };
        rows.push((v.to_string(), experiment(&prep, p, ell, depth, n_sum)?));
    }
    let name = match args.param {
        SweepParam::Ell => "ell",
        SweepParam::Depth => "N",
        SweepParam::NSum => "n",
    };
    emit(&sweep_csv(name, &rows), args.csv.as_ref(), out)?;
    if let Some(path) = &args.out {
        let reports: Vec<&ExperimentReport> = rows.iter().map(|(_, r)| r).collect();
        let timing = p.timing.then(|| started.elapsed().as_secs_f64());
        write_file(path, &sample_json(&prep, &reports, timing)?)?;
    }
    Ok(if rows.iter().any(|(_, r)| r.incomplete) { EXIT_FAILURE } else { EXIT_OK })
}
