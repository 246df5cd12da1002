//! `ftl-lab`: command-line front end for the profile solvers, the
//! follow-the-leader simulator and the viscous comparison.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input, 3 certified
//! nonexistence or blow-up.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use ftl_core::ftl::FtlError;
use ftl_core::model::{CaseLabel, CaseReport, FluxModel, ModelError, RoadCondition, RootSide};
use ftl_core::profile::{ProfileError, SolverOptions};
use ftl_core::viscous::ViscousError;

mod commands;
pub mod config;
pub mod plot;

use config::ConfigFile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NONEXISTENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ftl-lab",
    version,
    about = "Stationary profiles and follow-the-leader traffic across a speed-limit jump"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a jump (rho-, rho+) into cases 1A..2D.
    Classify(ClassifyArgs),
    /// Travelling wave W of a uniform road.
    ProfileW(ProfileWArgs),
    /// Stationary profile Q across the jump, solved backward from x = 0.
    ProfileQ(ProfileQArgs),
    /// One profile per Q(0) on a grid.
    Family(FamilyArgs),
    /// Follow-the-leader simulation from Riemann data.
    Ftl(FtlArgs),
    /// Stationary viscous profiles.
    ViscousProfile(ViscousProfileArgs),
    /// Viscous conservation law from Riemann data.
    ViscousPde(ViscousPdeArgs),
    /// Checks on one profile: residual, asymptotes, transversality, tracing.
    Diagnostics(DiagnosticsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhiChoice {
    /// phi(rho) = 1 - rho
    Lw,
    /// phi(rho) = 1 - rho^2
    Quadratic,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// `key = value` recipe; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "lw")]
    pub phi: PhiChoice,
    /// Speed limit on x < 0.
    #[arg(long, default_value_t = 2.0)]
    pub v_minus: f64,
    /// Speed limit on x >= 0.
    #[arg(long, default_value_t = 1.0)]
    pub v_plus: f64,
    /// Car length.
    #[arg(long, default_value_t = 0.2)]
    pub ell: f64,
}

/// Root sides `left-right`, e.g. `low-high`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sides(pub RootSide, pub RootSide);

fn parse_sides(s: &str) -> Result<Sides, String> {
    let side = |t: &str| match t {
        "low" => Ok(RootSide::Low),
        "high" => Ok(RootSide::High),
        _ => Err(format!("`{t}` is neither low nor high")),
    };
    let (a, b) = s
        .split_once('-')
        .ok_or_else(|| format!("expected left-right such as low-high, got `{s}`"))?;
    Ok(Sides(side(a)?, side(b)?))
}

#[derive(Debug, Clone, Args)]
pub struct CaseArgs {
    /// Case label 1A..2D; picks the root sides.
    #[arg(long = "case")]
    pub label: Option<CaseLabel>,
    /// Flux level across the jump.
    #[arg(long)]
    pub fbar: Option<f64>,
    /// Roots taken on the left and right, e.g. low-high.
    #[arg(long, value_parser = parse_sides)]
    pub side: Option<Sides>,
    /// Explicit left state; needs --rho-plus.
    #[arg(long)]
    pub rho_minus: Option<f64>,
    /// Explicit right state; needs --rho-minus.
    #[arg(long)]
    pub rho_plus: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Profile grid step; defaults to ell / 64.
    #[arg(long)]
    pub h: Option<f64>,
    /// Left end of the backward solve; defaults to -40 ell.
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub case: CaseArgs,
}

#[derive(Debug, Args)]
pub struct ProfileWArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Flux level.
    #[arg(long, default_value_t = 0.1875)]
    pub fbar: f64,
    /// Road speed; defaults to --v-plus.
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitialChoice {
    /// Constant for Q(0) = rho+, shifted wave otherwise.
    Auto,
    Shifted,
    Constant,
}

#[derive(Debug, Args)]
pub struct ProfileQArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub case: CaseArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Q(0); defaults to rho+.
    #[arg(long)]
    pub q0: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    pub initial: InitialChoice,
}

#[derive(Debug, Args)]
pub struct FamilyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub case: CaseArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// `lo:hi:n` or a comma list; defaults to 8 points over the admissible range.
    #[arg(long)]
    pub q0_grid: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct FtlArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub case: CaseArgs,
    /// Riemann states `rhoL,rhoR`; defaults to the case's (rho-, rho+).
    #[arg(long)]
    pub riemann: Option<String>,
    /// Offsets of the left lattice in units of its spacing, comma separated.
    #[arg(long, default_value = "0")]
    pub x0_spacings: String,
    #[arg(long, default_value_t = 600)]
    pub n_left: usize,
    #[arg(long, default_value_t = 600)]
    pub n_right: usize,
    /// Final time.
    #[arg(long = "T", default_value_t = 2.0)]
    pub t_end: f64,
    /// Time step; defaults to 0.1 ell over the fastest car, capped by --dt-cap.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub dt_cap: f64,
    #[arg(long, default_value_t = 100)]
    pub record_every: usize,
    /// Split steps at crossings of x = 0.
    #[arg(long, value_enum, default_value = "on")]
    pub events: Switch,
}

#[derive(Debug, Args)]
pub struct ViscousProfileArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    /// Values rho(0), comma separated; defaults to the midpoint of the feasible set.
    #[arg(long)]
    pub anchors: Option<String>,
    /// Half-width of the grid; defaults to 40 epsilon / c_hat0.
    #[arg(long)]
    pub xspan: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ViscousPdeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub case: CaseArgs,
    /// Riemann states `rhoL,rhoR`; defaults to the case's (rho-, rho+).
    #[arg(long)]
    pub riemann: Option<String>,
    #[arg(long, default_value_t = 0.02)]
    pub epsilon: f64,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub x_lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub x_hi: f64,
    #[arg(long, default_value_t = 1500)]
    pub cells: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    pub t_end: f64,
    /// Interval between written states; only the ends when absent.
    #[arg(long)]
    pub record_dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DiagnosticsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub case: CaseArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Q(0); defaults to rho+.
    #[arg(long)]
    pub q0: Option<f64>,
    /// Cars traced through one period.
    #[arg(long, default_value_t = 60)]
    pub cars: usize,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Nonexistence(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Nonexistence(_) => EXIT_NONEXISTENCE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Nonexistence(m) => write!(f, "no profile: {m}"),
            CliError::Failure(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::Member { source, .. } => (*source).into(),
            ProfileError::BlowUp { .. } => CliError::Nonexistence(e.to_string()),
            ProfileError::Model(_)
            | ProfileError::DensityDomain(_)
            | ProfileError::OutOfRange { .. }
            | ProfileError::InvalidInitialData(_)
            | ProfileError::DegenerateCase { .. } => CliError::Invalid(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<FtlError> for CliError {
    fn from(e: FtlError) -> Self {
        match e {
            FtlError::Model(_) | FtlError::InvalidInput(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<ViscousError> for CliError {
    fn from(e: ViscousError) -> Self {
        match e {
            ViscousError::BlowUp { .. } => CliError::Nonexistence(e.to_string()),
            ViscousError::Model(_) | ViscousError::InvalidInput(_) => {
                CliError::Invalid(e.to_string())
            }
            ViscousError::Domain { .. } => CliError::Failure(e.to_string()),
        }
    }
}

impl CommonArgs {
    pub fn model(&self) -> FluxModel {
        match self.phi {
            PhiChoice::Lw => FluxModel::lighthill_whitham(),
            PhiChoice::Quadratic => FluxModel::quadratic(),
        }
    }

    pub fn road(&self) -> Result<RoadCondition, CliError> {
        Ok(RoadCondition::new(self.v_minus, self.v_plus)?)
    }

    pub fn check(&self) -> Result<(), CliError> {
        if !(self.ell > 0.0) {
            return Err(CliError::Invalid(format!(
                "ell = {} must be positive",
                self.ell
            )));
        }
        Ok(())
    }
}

impl CaseArgs {
    /// Resolves the jump from explicit states, or from `fbar` and root sides.
    pub fn resolve(&self, model: &FluxModel, road: &RoadCondition) -> Result<CaseReport, CliError> {
        let report = match (self.rho_minus, self.rho_plus) {
            (Some(m), Some(p)) => model.classify_case(road, m, p)?,
            (None, None) => {
                let sides = match (self.side, self.label) {
                    (Some(s), _) => s,
                    (None, Some(label)) => {
                        let (_, l, r) = label.sides();
                        Sides(l, r)
                    }
                    (None, None) => {
                        return Err(CliError::Invalid(
                            "give --case, --side or both --rho-minus and --rho-plus".into(),
                        ))
                    }
                };
                let fbar = self.fbar.unwrap_or(0.1875);
                model.classify_fbar(road, fbar, sides.0, sides.1)?
            }
            _ => {
                return Err(CliError::Invalid(
                    "--rho-minus and --rho-plus go together".into(),
                ))
            }
        };
        if let Some(label) = self.label {
            if label != report.label {
                return Err(CliError::Invalid(format!(
                    "data give case {} but --case {label} was requested (check the speed limits)",
                    report.label
                )));
            }
        }
        Ok(report)
    }
}

impl SolverArgs {
    pub fn options(&self, ell: f64) -> Result<SolverOptions, CliError> {
        let mut opts = SolverOptions::default();
        if let Some(h) = self.h {
            opts.steps_per_length = steps_per_length(h, ell)?;
        }
        Ok(opts)
    }

    pub fn x_min(&self, ell: f64) -> Result<f64, CliError> {
        let x = self.x_min.unwrap_or(-40.0 * ell);
        if !(x < 0.0) {
            return Err(CliError::Invalid(format!("x-min = {x} must be negative")));
        }
        Ok(x)
    }
}

pub(crate) fn steps_per_length(h: f64, ell: f64) -> Result<usize, CliError> {
    if !(h > 0.0 && h <= ell) {
        return Err(CliError::Invalid(format!("h = {h} must lie in (0, ell]")));
    }
    Ok((ell / h).round().max(1.0) as usize)
}

/// Parses a comma list of reals.
pub(crate) fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Invalid(format!("{what}: `{t}` is not a number")))
        })
        .collect()
}

/// Finds `--config` in raw arguments.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Inserts recipe flags right after the subcommand, skipping any the user
/// gave explicitly.
fn expand_with_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let cfg = ConfigFile::load(&path).map_err(CliError::Invalid)?;
    let cmd = Cli::command();
    let Some(pos) = args
        .iter()
        .position(|a| cmd.find_subcommand(a.to_string_lossy().as_ref()).is_some())
    else {
        return Ok(args);
    };
    let sub_name = args[pos].to_string_lossy().to_string();
    let sub = cmd.find_subcommand(&sub_name).expect("found above");
    let longs: Vec<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    let given: Vec<String> = args[pos + 1..]
        .iter()
        .filter_map(|a| {
            let s = a.to_string_lossy();
            s.strip_prefix("--")
                .map(|f| f.split('=').next().unwrap_or("").to_string())
        })
        .collect();
    let flags = cfg
        .flags_for(&sub_name, |k| k != "config" && longs.iter().any(|l| l == k))
        .map_err(CliError::Invalid)?;
    let mut out: Vec<OsString> = args[..=pos].to_vec();
    for f in flags {
        let name = f[2..].split('=').next().unwrap_or("");
        if !given.iter().any(|g| g == name) {
            out.push(f.into());
        }
    }
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the exit code. Reports go to `out`, diagnostics to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let args = match expand_with_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match commands::dispatch(&cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

/// Creates `dir` and returns the path of `name` inside it.
pub(crate) fn output_path(dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Failure(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.join(name))
}
