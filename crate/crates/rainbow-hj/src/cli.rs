//! Command-line front end: JSON run configuration, six subcommands, and
//! stable exit codes.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 invalid
//! configuration or arguments, 3 runtime failure (I/O), 4 unsupported
//! dimension, 5 Hamilton-Jacobi domain error.
//!
//! Every command is a pure function of the configuration file and flags:
//! rerunning with the same inputs produces byte-identical output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use crate::correspondence::{
    hamiltonian_residual, short_map_check, solution_metric, ShortMapTarget,
};
use crate::grid::{for_each_node, write_grid_csv, AxisSpec, ValueSurface};
use crate::hamilton_jacobi::{
    bracketing_radius, hopf_lax_solve, legendre_transform, legendre_transform_saturating,
    semigroup_residual, HJProblem, HamiltonianSpec, HjError, LagrangianTable,
};
use crate::market::{term_count, CorrelationMatrix, MarketModel, OptionSpec, ValidatedModel};
use crate::montecarlo::{mc_price, PathConfig};
use crate::pde::{bs_closed_form_1d, solve_bs_pde, GridSpec, PdeError, Scheme};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_UNSUPPORTED_DIMENSION: i32 = 4;
pub const EXIT_HJ_DOMAIN: i32 = 5;

#[derive(Parser)]
#[command(
    name = "rainbow-hj",
    version,
    about = "Rainbow option pricing and Hamilton-Jacobi verification toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Write primary output here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Restrict output to one format (default emits the command's full set).
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Override the random seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the Monte Carlo path count from the configuration.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Suppress progress notes on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo price of the configured contract.
    PriceMc,
    /// Finite-difference price surface plus a summary.
    PricePde,
    /// Closed-form single-asset call price.
    ClosedForm,
    /// Hopf-Lax solution surface for the configured Hamilton-Jacobi problem.
    HopfLax,
    /// Run the built-in verification checks.
    Verify,
    /// Error-versus-resolution ladder for the PDE or Monte Carlo pricer.
    Convergence,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// A failed run: exit code plus a message for stderr.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }

    fn unsupported(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_UNSUPPORTED_DIMENSION,
            message: message.into(),
        }
    }
}

impl From<PdeError> for Failure {
    fn from(e: PdeError) -> Self {
        match e {
            PdeError::UnsupportedDimension { .. } => Failure::unsupported(e.to_string()),
            _ => Failure::validation(e.to_string()),
        }
    }
}

impl From<HjError> for Failure {
    fn from(e: HjError) -> Self {
        let code = match e {
            HjError::BadAxis
            | HjError::TableShape { .. }
            | HjError::BadTimes { .. }
            | HjError::UnsupportedDimension { .. } => EXIT_VALIDATION,
            _ => EXIT_HJ_DOMAIN,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::runtime(e.to_string())
    }
}

// ---------------------------------------------------------------------------
// Configuration file schema. Unknown keys are rejected everywhere so typos
// fail loudly instead of silently using defaults.
// ---------------------------------------------------------------------------

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    market: Option<MarketSection>,
    option: Option<OptionSection>,
    mc: Option<McSection>,
    grid: Option<GridSection>,
    hj: Option<HjSection>,
    verify: Option<VerifySection>,
    convergence: Option<ConvergenceSection>,
    output: Option<OutputSection>,
}

#[derive(Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct MarketSection {
    spots: Vec<f64>,
    vols: Vec<f64>,
    rate: f64,
    /// Full correlation matrix; identity when omitted.
    corr: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct OptionSection {
    #[serde(default)]
    kind: PayoffKindSection,
    strike: f64,
    maturity: f64,
}

#[derive(Deserialize, Clone, Copy, Default)]
enum PayoffKindSection {
    #[default]
    #[serde(rename = "max-call")]
    MaxCall,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct McSection {
    n_paths: usize,
    seed: u64,
    #[serde(default)]
    antithetic: bool,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct AxisSection {
    x_min: f64,
    x_max: f64,
    nodes: usize,
}

impl AxisSection {
    fn to_axis(self) -> AxisSpec {
        AxisSpec::new(self.x_min, self.x_max, self.nodes)
    }
}

#[derive(Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct GridSection {
    axes: Vec<AxisSection>,
    time_steps: usize,
    scheme: SchemeSection,
    theta: Option<f64>,
}

#[derive(Deserialize, Clone, Copy)]
enum SchemeSection {
    #[serde(rename = "theta-1d")]
    Theta1d,
    #[serde(rename = "adi-2d")]
    Adi2d,
    #[serde(rename = "explicit-2d")]
    Explicit2d,
}

impl SchemeSection {
    fn to_scheme(self) -> Scheme {
        match self {
            SchemeSection::Theta1d => Scheme::Theta1d,
            SchemeSection::Adi2d => Scheme::Adi2d,
            SchemeSection::Explicit2d => Scheme::Explicit2d,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HjSection {
    hamiltonian: HamiltonianSection,
    initial: InitialSection,
    /// Lipschitz constant of the initial datum; derived from the datum when
    /// omitted.
    lipschitz_bound: Option<f64>,
    p_grid: Option<AxisSection>,
    q_grid: Option<AxisSection>,
    x_grid: Option<AxisSection>,
    times: Option<Vec<f64>>,
    /// Record +inf at velocities the momentum grid cannot certify instead
    /// of failing (needed for Hamiltonians with bounded conjugate support).
    #[serde(default)]
    saturating: bool,
}

#[derive(Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum HamiltonianSection {
    #[serde(rename = "quadratic")]
    Quadratic,
    #[serde(rename = "quartic")]
    Quartic,
    #[serde(rename = "abs")]
    Abs,
    #[serde(rename = "polynomial")]
    Polynomial { coeffs: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum InitialSection {
    #[serde(rename = "affine")]
    Affine {
        slope: f64,
        #[serde(default)]
        intercept: f64,
    },
    #[serde(rename = "abs")]
    Abs,
    /// Hinge datum scale * max(x - kink, 0).
    #[serde(rename = "call")]
    Call {
        kink: f64,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct VerifySection {
    checks: Option<Vec<CheckName>>,
    pairs: Option<usize>,
    triples: Option<usize>,
    dims: Option<Vec<usize>>,
    seed: Option<u64>,
    /// Multiplies the payoff in the short-map check; anything above 1
    /// breaks the contraction property by design.
    short_map_scale: Option<f64>,
    residual_tolerance: Option<f64>,
    semigroup_tolerance: Option<f64>,
}

#[derive(Deserialize, Clone, Copy, PartialEq, Eq)]
enum CheckName {
    #[serde(rename = "term-count")]
    TermCount,
    #[serde(rename = "short-map")]
    ShortMap,
    #[serde(rename = "metric-axioms")]
    MetricAxioms,
    #[serde(rename = "hamiltonian-residual")]
    HamiltonianResidual,
    #[serde(rename = "semigroup")]
    Semigroup,
}

impl CheckName {
    fn label(self) -> &'static str {
        match self {
            CheckName::TermCount => "term-count",
            CheckName::ShortMap => "short-map",
            CheckName::MetricAxioms => "metric-axioms",
            CheckName::HamiltonianResidual => "hamiltonian-residual",
            CheckName::Semigroup => "semigroup",
        }
    }
}

#[derive(Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct ConvergenceSection {
    target: TargetSection,
    nodes: Option<Vec<usize>>,
    paths: Option<Vec<usize>>,
    seeds: Option<usize>,
}

#[derive(Deserialize, Clone, Copy, PartialEq, Eq)]
enum TargetSection {
    #[serde(rename = "pde")]
    Pde,
    #[serde(rename = "mc")]
    Mc,
}

#[derive(Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    path: Option<String>,
    format: Option<FormatSection>,
    slices: Option<SlicesSection>,
}

#[derive(Deserialize, Clone, Copy)]
enum FormatSection {
    #[serde(rename = "csv")]
    Csv,
    #[serde(rename = "json")]
    Json,
}

#[derive(Deserialize, Clone, Copy, PartialEq, Eq)]
enum SlicesSection {
    #[serde(rename = "initial")]
    Initial,
    #[serde(rename = "terminal")]
    Terminal,
    #[serde(rename = "all")]
    All,
}

// ---------------------------------------------------------------------------
// Resolved run context shared by the commands.
// ---------------------------------------------------------------------------

struct Run {
    config: FileConfig,
    out_path: Option<PathBuf>,
    format: Option<FormatArg>,
    seed: Option<u64>,
    paths: Option<usize>,
    quiet: bool,
}

impl Run {
    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn model(&self) -> Result<ValidatedModel, Failure> {
        let section = self
            .config
            .market
            .as_ref()
            .ok_or_else(|| Failure::validation("configuration is missing the market section"))?;
        build_model(section)
    }

    fn model_or_default(&self) -> Result<ValidatedModel, Failure> {
        match self.config.market.as_ref() {
            Some(section) => build_model(section),
            None => Ok(default_model()),
        }
    }

    fn option(&self) -> Result<OptionSpec, Failure> {
        let section = self
            .config
            .option
            .as_ref()
            .ok_or_else(|| Failure::validation("configuration is missing the option section"))?;
        build_option(section)
    }

    fn option_or_default(&self) -> Result<OptionSpec, Failure> {
        match self.config.option.as_ref() {
            Some(section) => build_option(section),
            None => Ok(OptionSpec::max_call(100.0, 1.0).expect("default contract is valid")),
        }
    }

    fn path_config(&self) -> Result<PathConfig, Failure> {
        let (n_paths, seed, antithetic) = match self.config.mc {
            Some(sec) => (sec.n_paths, sec.seed, sec.antithetic),
            None => (100_000, 0, false),
        };
        let pc = PathConfig {
            n_paths: self.paths.unwrap_or(n_paths),
            seed: self.seed.unwrap_or(seed),
            antithetic,
        };
        pc.validate().map_err(|e| Failure::validation(e.to_string()))?;
        Ok(pc)
    }

    fn slices(&self) -> SlicesSection {
        self.config
            .output
            .as_ref()
            .and_then(|o| o.slices)
            .unwrap_or(SlicesSection::Initial)
    }

    /// Writes the primary artifact to the output path or stdout.
    fn emit(&self, text: &str) -> Result<(), Failure> {
        match &self.out_path {
            Some(path) => {
                fs::write(path, text)
                    .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
                self.note(&format!("wrote {}", path.display()));
                Ok(())
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }

    /// CSV-plus-JSON emission used by the surface-producing commands:
    /// `--format` narrows to one artifact, otherwise the CSV goes to the
    /// output path (or stdout) and the JSON summary line to stdout.
    fn emit_csv_and_json(&self, csv: &str, summary: &serde_json::Value) -> Result<(), Failure> {
        let line = format!("{summary}\n");
        match self.format {
            Some(FormatArg::Json) => self.emit(&line),
            Some(FormatArg::Csv) => self.emit(csv),
            None => {
                self.emit(csv)?;
                if self.out_path.is_some() {
                    print!("{line}");
                }
                Ok(())
            }
        }
    }
}

fn default_model() -> ValidatedModel {
    MarketModel::new(vec![100.0], vec![0.2], 0.05, CorrelationMatrix::identity(1))
        .validate()
        .expect("default model is valid")
}

fn build_model(section: &MarketSection) -> Result<ValidatedModel, Failure> {
    let corr = match &section.corr {
        Some(rows) => CorrelationMatrix::from_rows(rows)
            .map_err(|e| Failure::validation(format!("market.corr: {e}")))?,
        None => CorrelationMatrix::identity(section.spots.len()),
    };
    MarketModel::new(
        section.spots.clone(),
        section.vols.clone(),
        section.rate,
        corr,
    )
    .validate()
    .map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("market: {e}")).collect();
        Failure::validation(lines.join("\n"))
    })
}

fn build_option(section: &OptionSection) -> Result<OptionSpec, Failure> {
    let PayoffKindSection::MaxCall = section.kind;
    OptionSpec::max_call(section.strike, section.maturity).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("option: {e}")).collect();
        Failure::validation(lines.join("\n"))
    })
}

fn build_grid(section: &GridSection) -> GridSpec {
    GridSpec {
        axes: section.axes.iter().map(|a| a.to_axis()).collect(),
        time_steps: section.time_steps,
        scheme: section.scheme.to_scheme(),
        theta: section.theta.unwrap_or(0.5),
    }
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, Failure> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))
}

/// Parses arguments, runs the selected command, and returns the exit code.
pub fn run_cli() -> i32 {
    let cli = Cli::parse();
    let config = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return f.code;
        }
    };
    let run = Run {
        out_path: cli
            .output
            .clone()
            .or_else(|| config.output.as_ref().and_then(|o| o.path.clone().map(PathBuf::from))),
        format: cli.format.or_else(|| {
            config.output.as_ref().and_then(|o| {
                o.format.map(|f| match f {
                    FormatSection::Csv => FormatArg::Csv,
                    FormatSection::Json => FormatArg::Json,
                })
            })
        }),
        seed: cli.seed,
        paths: cli.paths,
        quiet: cli.quiet,
        config,
    };
    let result = match cli.command {
        Command::PriceMc => cmd_price_mc(&run),
        Command::PricePde => cmd_price_pde(&run),
        Command::ClosedForm => cmd_closed_form(&run),
        Command::HopfLax => cmd_hopf_lax(&run),
        Command::Verify => cmd_verify(&run),
        Command::Convergence => cmd_convergence(&run),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------

fn cmd_price_mc(run: &Run) -> Result<i32, Failure> {
    let model = run.model()?;
    let option = run.option()?;
    let pc = run.path_config()?;
    let estimate = mc_price(&model, &option, &pc).map_err(|e| Failure::validation(e.to_string()))?;
    let text = match run.format {
        Some(FormatArg::Csv) => format!(
            "price,std_error,n_paths,seed\n{},{},{},{}\n",
            estimate.price, estimate.std_error, estimate.n_paths, pc.seed
        ),
        _ => format!(
            "{}\n",
            json!({
                "price": estimate.price,
                "std_error": estimate.std_error,
                "n_paths": estimate.n_paths,
                "seed": pc.seed,
            })
        ),
    };
    run.emit(&text)?;
    Ok(EXIT_OK)
}

fn cmd_closed_form(run: &Run) -> Result<i32, Failure> {
    let model = run.model()?;
    let option = run.option()?;
    if model.n() != 1 {
        return Err(Failure::unsupported(format!(
            "closed form covers a single asset, model has {}",
            model.n()
        )));
    }
    let price = bs_closed_form_1d(
        model.spots()[0],
        option.strike,
        model.rate(),
        model.vols()[0],
        option.maturity,
    );
    let text = match run.format {
        Some(FormatArg::Csv) => format!("price\n{price}\n"),
        _ => format!("{}\n", json!({ "price": price })),
    };
    run.emit(&text)?;
    Ok(EXIT_OK)
}

fn scheme_label(s: Scheme) -> &'static str {
    match s {
        Scheme::Theta1d => "theta-1d",
        Scheme::Adi2d => "adi-2d",
        Scheme::Explicit2d => "explicit-2d",
    }
}

/// Surface CSV in spot coordinates: one row per node, one value column per
/// selected time slice.
fn surface_csv_in_spot_coords(surface: &ValueSurface, slice_indices: &[usize]) -> String {
    let axes = surface.axes();
    let mut text = String::new();
    for i in 0..axes.len() {
        if i > 0 {
            text.push(',');
        }
        let _ = write!(text, "s{}", i + 1);
    }
    for &k in slice_indices {
        let _ = write!(text, ",t={}", surface.times()[k]);
    }
    text.push('\n');
    for_each_node(axes, |idx, flat| {
        for (i, &j) in idx.iter().enumerate() {
            if i > 0 {
                text.push(',');
            }
            let _ = write!(text, "{}", axes[i].coord(j).exp());
        }
        for &k in slice_indices {
            let _ = write!(text, ",{}", surface.slice(k)[flat]);
        }
        text.push('\n');
    });
    text
}

fn cmd_price_pde(run: &Run) -> Result<i32, Failure> {
    let model = run.model()?;
    let option = run.option()?;
    let section = run
        .config
        .grid
        .as_ref()
        .ok_or_else(|| Failure::validation("configuration is missing the grid section"))?;
    if model.n() > 2 || section.axes.len() > 2 {
        return Err(Failure::unsupported(format!(
            "finite differences cover 1 or 2 assets, requested {}",
            model.n().max(section.axes.len())
        )));
    }
    let grid = build_grid(section);
    let surface = solve_bs_pde(&model, &option, &grid)?;
    let logs: Vec<f64> = model.spots().iter().map(|s| s.ln()).collect();
    let price_at_spot = surface
        .interpolate(0, &logs)
        .map_err(|_| Failure::validation("market spots fall outside the grid hull"))?;
    let slice_indices: Vec<usize> = match run.slices() {
        SlicesSection::Initial => vec![0],
        SlicesSection::Terminal => vec![surface.times().len() - 1],
        SlicesSection::All => (0..surface.times().len()).collect(),
    };
    let csv = surface_csv_in_spot_coords(&surface, &slice_indices);
    let summary = json!({
        "price_at_spot": price_at_spot,
        "scheme": scheme_label(grid.scheme),
        "time_steps": grid.time_steps,
        "axes": grid.axes.iter().map(|a| json!({
            "x_min": a.x_min, "x_max": a.x_max, "nodes": a.nodes,
        })).collect::<Vec<_>>(),
    });
    run.emit_csv_and_json(&csv, &summary)?;
    Ok(EXIT_OK)
}

fn build_hamiltonian(section: &HamiltonianSection) -> HamiltonianSpec {
    match section {
        HamiltonianSection::Quadratic => HamiltonianSpec::quadratic(),
        HamiltonianSection::Quartic => HamiltonianSpec::quartic(),
        HamiltonianSection::Abs => HamiltonianSpec::abs_norm(),
        HamiltonianSection::Polynomial { coeffs } => HamiltonianSpec::polynomial(coeffs.clone()),
    }
}

fn build_problem(section: &HjSection) -> Result<HJProblem, Failure> {
    let hamiltonian = build_hamiltonian(&section.hamiltonian);
    let (initial, natural_lip): (Box<dyn Fn(f64) -> f64 + Send + Sync>, f64) =
        match section.initial {
            InitialSection::Affine { slope, intercept } => {
                (Box::new(move |x| slope * x + intercept), slope.abs())
            }
            InitialSection::Abs => (Box::new(f64::abs), 1.0),
            InitialSection::Call { kink, scale } => {
                (Box::new(move |x| scale * (x - kink).max(0.0)), scale.abs())
            }
        };
    let lip = section.lipschitz_bound.unwrap_or(natural_lip);
    if !(lip >= 0.0) || !lip.is_finite() {
        return Err(Failure::validation(format!(
            "hj.lipschitz_bound must be finite and nonnegative, got {lip}"
        )));
    }
    Ok(HJProblem::new(hamiltonian, lip, initial)?)
}

fn build_table(section: &HjSection, problem: &HJProblem) -> Result<LagrangianTable, Failure> {
    let p_axis = section
        .p_grid
        .map(AxisSection::to_axis)
        .unwrap_or_else(|| AxisSpec::new(-10.0, 10.0, 4001));
    let q_axis = section
        .q_grid
        .map(AxisSection::to_axis)
        .unwrap_or_else(|| AxisSpec::new(-6.0, 6.0, 2401));
    let table = if section.saturating {
        legendre_transform_saturating(problem.hamiltonian(), p_axis, q_axis)?
    } else {
        legendre_transform(problem.hamiltonian(), p_axis, q_axis)?
    };
    Ok(table)
}

fn cmd_hopf_lax(run: &Run) -> Result<i32, Failure> {
    let section = run
        .config
        .hj
        .as_ref()
        .ok_or_else(|| Failure::validation("configuration is missing the hj section"))?;
    let problem = build_problem(section)?;
    let table = build_table(section, &problem)?;
    let radius = bracketing_radius(&problem, &table);
    let x_axis = section
        .x_grid
        .map(AxisSection::to_axis)
        .unwrap_or_else(|| AxisSpec::new(-3.0, 3.0, 1201));
    let times = section.times.clone().unwrap_or_else(|| vec![0.5, 1.0]);
    run.note(&format!(
        "velocity bracketing radius {radius}; solving {} nodes x {} times",
        x_axis.nodes,
        times.len()
    ));
    let surface = hopf_lax_solve(&problem, &table, x_axis, &times)?;
    let mut csv = Vec::new();
    let columns: Vec<(String, &[f64])> = (0..times.len())
        .map(|k| (format!("t={}", times[k]), surface.slice(k)))
        .collect();
    write_grid_csv(&mut csv, &["x".to_string()], surface.axes(), &columns)?;
    let t_max = *times.last().expect("times checked non-empty");
    let summary = json!({
        "velocity_radius": radius,
        "bracket_radius": radius * t_max,
        "saturating": section.saturating,
    });
    run.emit_csv_and_json(
        std::str::from_utf8(&csv).expect("CSV is ASCII"),
        &summary,
    )?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------
// verify: named checks with a JSON report and exit 1 on any failure.
// ---------------------------------------------------------------------------

/// Linear congruential step shared by the sampling checks; quality needs are
/// modest and reproducibility is what matters.
fn lcg(state: &mut u64) -> f64 {
    *state = state
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    ((*state >> 11) as f64) / (1u64 << 53) as f64
}

struct CheckOutcome {
    name: &'static str,
    passed: bool,
    details: serde_json::Value,
}

fn check_term_count() -> CheckOutcome {
    let measured: Vec<u64> = (1..=5).map(term_count).collect();
    let expected = [4u64, 7, 11, 16, 22];
    CheckOutcome {
        name: CheckName::TermCount.label(),
        passed: measured == expected,
        details: json!({ "measured": measured, "expected": expected }),
    }
}

fn check_short_map(dims: &[usize], pairs: usize, scale: f64, seed: u64) -> CheckOutcome {
    let mut state = seed.wrapping_add(0x517c_c1b7_2722_0a95);
    let mut per_dim = Vec::new();
    let mut passed = true;
    for &n in dims {
        let samples: Vec<(Vec<f64>, Vec<f64>)> = (0..pairs)
            .map(|_| {
                let a: Vec<f64> = (0..n).map(|_| 300.0 * lcg(&mut state)).collect();
                let mut b: Vec<f64> = (0..n).map(|_| 300.0 * lcg(&mut state)).collect();
                if a == b {
                    b[0] += 0.1;
                }
                (a, b)
            })
            .collect();
        match short_map_check(
            &ShortMapTarget::Payoff {
                strike: 100.0,
                scale,
            },
            &samples,
        ) {
            Ok(report) => {
                passed &= report.passes;
                per_dim.push(json!({ "n": n, "max_ratio": report.max_ratio }));
            }
            Err(e) => {
                passed = false;
                per_dim.push(json!({ "n": n, "error": e.to_string() }));
            }
        }
    }
    CheckOutcome {
        name: CheckName::ShortMap.label(),
        passed,
        details: json!({ "scale": scale, "pairs": pairs, "per_dim": per_dim }),
    }
}

fn check_metric_axioms(triples: usize, seed: u64) -> CheckOutcome {
    let axis = AxisSpec::new(0.0, 1.0, 17);
    let mut state = seed.wrapping_add(0x9e37);
    let random_surface = |state: &mut u64| {
        let values: Vec<f64> = (0..17).map(|_| 200.0 * lcg(state) - 100.0).collect();
        ValueSurface::new(vec![axis], vec![0.0], vec![values]).expect("surface shape is fixed")
    };
    let mut passed = true;
    let mut worst_slack = f64::NEG_INFINITY;
    for _ in 0..triples {
        let a = random_surface(&mut state);
        let b = random_surface(&mut state);
        let c = random_surface(&mut state);
        let dab = solution_metric(&a, 0, &b, 0).expect("grids match");
        let dba = solution_metric(&b, 0, &a, 0).expect("grids match");
        let dac = solution_metric(&a, 0, &c, 0).expect("grids match");
        let dbc = solution_metric(&b, 0, &c, 0).expect("grids match");
        let daa = solution_metric(&a, 0, &a, 0).expect("grids match");
        let slack = dac - (dab + dbc);
        worst_slack = worst_slack.max(slack);
        passed &= dab >= 0.0
            && dab == dba
            && daa == 0.0
            && slack <= 1e-12 * (1.0 + dab + dbc);
    }
    CheckOutcome {
        name: CheckName::MetricAxioms.label(),
        passed,
        details: json!({ "triples": triples, "worst_triangle_slack": worst_slack }),
    }
}

fn check_hamiltonian_residual(run: &Run, tolerance: f64) -> Result<CheckOutcome, Failure> {
    let model = run.model_or_default()?;
    let option = run.option_or_default()?;
    let model = if model.n() == 1 { model } else { default_model() };
    let (axis, slices) = match run.config.grid.as_ref() {
        Some(g) if g.axes.len() == 1 => (g.axes[0].to_axis(), g.time_steps + 1),
        _ => {
            let center = model.spots()[0].ln();
            (AxisSpec::new(center - 1.0, center + 1.0, 401), 401)
        }
    };
    // Sample the exact solution up to 0.9 T so the payoff kink at maturity
    // does not dominate the truncation error.
    let horizon = 0.9 * option.maturity;
    let times: Vec<f64> = (0..slices)
        .map(|k| horizon * k as f64 / (slices - 1) as f64)
        .collect();
    let surface = crate::pde::sample_closed_form_surface(&model, &option, axis, times)?;
    let report = hamiltonian_residual(&model, &surface)
        .map_err(|e| Failure::validation(e.to_string()))?;
    Ok(CheckOutcome {
        name: CheckName::HamiltonianResidual.label(),
        passed: report.max_abs <= tolerance,
        details: json!({
            "max_abs": report.max_abs,
            "mean_abs": report.mean_abs,
            "tolerance": tolerance,
            "nodes": axis.nodes,
        }),
    })
}

fn check_semigroup(tolerance: f64) -> Result<CheckOutcome, Failure> {
    let problem = HJProblem::new(HamiltonianSpec::quadratic(), 1.0, f64::abs)?;
    let table = legendre_transform(
        problem.hamiltonian(),
        AxisSpec::new(-10.0, 10.0, 4001),
        AxisSpec::new(-6.0, 6.0, 2401),
    )?;
    let axis = AxisSpec::new(-3.0, 3.0, 2001);
    let residual = semigroup_residual(&problem, &table, axis, 0.5, 1.0)?;
    let equal_times = semigroup_residual(&problem, &table, axis, 0.75, 0.75)?;
    Ok(CheckOutcome {
        name: CheckName::Semigroup.label(),
        passed: residual <= tolerance && equal_times == 0.0,
        details: json!({
            "residual": residual,
            "equal_times_residual": equal_times,
            "tolerance": tolerance,
        }),
    })
}

fn cmd_verify(run: &Run) -> Result<i32, Failure> {
    let section = run.config.verify.clone().unwrap_or(VerifySection {
        checks: None,
        pairs: None,
        triples: None,
        dims: None,
        seed: None,
        short_map_scale: None,
        residual_tolerance: None,
        semigroup_tolerance: None,
    });
    let checks = section.checks.clone().unwrap_or_else(|| {
        vec![
            CheckName::TermCount,
            CheckName::ShortMap,
            CheckName::MetricAxioms,
            CheckName::HamiltonianResidual,
            CheckName::Semigroup,
        ]
    });
    let pairs = section.pairs.unwrap_or(10_000);
    let triples = section.triples.unwrap_or(1_000);
    let dims = section.dims.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let seed = run.seed.or(section.seed).unwrap_or(1);
    let scale = section.short_map_scale.unwrap_or(1.0);
    let residual_tol = section.residual_tolerance.unwrap_or(1e-2);
    let semigroup_tol = section.semigroup_tolerance.unwrap_or(2e-3);

    let mut outcomes = Vec::new();
    for check in checks {
        let outcome = match check {
            CheckName::TermCount => check_term_count(),
            CheckName::ShortMap => check_short_map(&dims, pairs, scale, seed),
            CheckName::MetricAxioms => check_metric_axioms(triples, seed),
            CheckName::HamiltonianResidual => check_hamiltonian_residual(run, residual_tol)?,
            CheckName::Semigroup => check_semigroup(semigroup_tol)?,
        };
        run.note(&format!(
            "check {}: {}",
            outcome.name,
            if outcome.passed { "pass" } else { "FAIL" }
        ));
        outcomes.push(outcome);
    }
    let all_passed = outcomes.iter().all(|o| o.passed);
    let report = json!({
        "checks": outcomes.iter().map(|o| json!({
            "name": o.name,
            "passed": o.passed,
            "details": o.details,
        })).collect::<Vec<_>>(),
        "all_passed": all_passed,
    });
    run.emit(&format!("{report}\n"))?;
    Ok(if all_passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}

// ---------------------------------------------------------------------------
// convergence: error-versus-resolution ladders with a fitted slope.
// ---------------------------------------------------------------------------

/// Least-squares slope of ln(err) against ln(scale); None below two rungs.
fn fit_loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(scale, err) in points {
        let (x, y) = (scale.ln(), err.max(1e-300).ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

fn cmd_convergence(run: &Run) -> Result<i32, Failure> {
    let section = run
        .config
        .convergence
        .clone()
        .ok_or_else(|| Failure::validation("configuration is missing the convergence section"))?;
    let model = run.model_or_default()?;
    let option = run.option_or_default()?;
    match section.target {
        TargetSection::Pde => {
            if model.n() != 1 {
                return Err(Failure::validation(
                    "the pde convergence ladder covers a single asset",
                ));
            }
            let ladder = section
                .nodes
                .unwrap_or_else(|| vec![50, 100, 200, 400]);
            if ladder.is_empty() {
                return Err(Failure::validation("convergence.nodes is empty"));
            }
            let exact = bs_closed_form_1d(
                model.spots()[0],
                option.strike,
                model.rate(),
                model.vols()[0],
                option.maturity,
            );
            let center = model.spots()[0].ln();
            let mut csv = String::from("nodes,h,error\n");
            let mut points = Vec::new();
            for &nodes in &ladder {
                let axis = AxisSpec::new(center - 1.0, center + 1.0, nodes.max(3));
                let grid = GridSpec {
                    axes: vec![axis],
                    time_steps: nodes.max(1),
                    scheme: Scheme::Theta1d,
                    theta: 0.5,
                };
                let surface = solve_bs_pde(&model, &option, &grid)?;
                let price = surface
                    .interpolate(0, &[center])
                    .expect("grid is centered on the spot");
                let err = (price - exact).abs();
                let _ = writeln!(csv, "{},{},{}", nodes, axis.step(), err);
                points.push((axis.step(), err));
                run.note(&format!("pde rung {nodes}: error {err:.3e}"));
            }
            let slope = fit_loglog_slope(&points);
            let summary = json!({ "target": "pde", "slope": slope, "rungs": ladder.len() });
            run.emit_csv_and_json(&csv, &summary)?;
            Ok(EXIT_OK)
        }
        TargetSection::Mc => {
            let ladder = section
                .paths
                .unwrap_or_else(|| vec![1_000, 10_000, 100_000, 1_000_000]);
            if ladder.is_empty() {
                return Err(Failure::validation("convergence.paths is empty"));
            }
            if model.n() != 1 {
                return Err(Failure::validation(
                    "the mc convergence ladder compares against the single-asset closed form",
                ));
            }
            let exact = bs_closed_form_1d(
                model.spots()[0],
                option.strike,
                model.rate(),
                model.vols()[0],
                option.maturity,
            );
            let replications = section.seeds.unwrap_or(16).max(1);
            let base_seed = run.seed.unwrap_or(0);
            let mut csv = String::from("paths,rms_error\n");
            let mut points = Vec::new();
            for &paths in &ladder {
                let mut sq = 0.0;
                for rep in 0..replications {
                    let pc = PathConfig {
                        n_paths: run.paths.unwrap_or(paths),
                        seed: base_seed.wrapping_add(rep as u64),
                        antithetic: false,
                    };
                    let est = mc_price(&model, &option, &pc)
                        .map_err(|e| Failure::validation(e.to_string()))?;
                    sq += (est.price - exact) * (est.price - exact);
                }
                let rms = (sq / replications as f64).sqrt();
                let _ = writeln!(csv, "{paths},{rms}");
                points.push((paths as f64, rms));
                run.note(&format!("mc rung {paths}: rms error {rms:.3e}"));
            }
            let slope = fit_loglog_slope(&points);
            let summary = json!({ "target": "mc", "slope": slope, "rungs": ladder.len() });
            run.emit_csv_and_json(&csv, &summary)?;
            Ok(EXIT_OK)
        }
    }
}
