//! Command-line front end: flags and flat TOML config files resolve to a
//! [`RunConfig`], which is validated and dispatched to the harness.

use std::env;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::harness::{
    compare_schemes, run_spatial_study, run_temporal_study, ComparisonReport, ConvergenceReport, ErrorNorm,
    ErrorProtocol, ErrorSpan, OutputFormat, SchemeKind, StudySettings,
};
use crate::problems::{ProblemName, ProblemSpec};
use crate::schemes::{CoarseForcing, SolverOptions, DEFAULT_PICARD_MAX_ITER, DEFAULT_PICARD_TOLERANCE};

/// Directory that relative `--output` paths, and default report names,
/// are placed in.
pub const OUTPUT_DIR_ENV: &str = "TTGCN_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// One run per scheme and alpha at `N` coarse steps.
    Run,
    /// `N, 2N, ...` coarse steps on a fixed mesh.
    TemporalStudy,
    /// `nx x ny, 2nx x 2ny, ...` meshes with fixed steps.
    SpatialStudy,
    /// TTGCN against SCN over a temporal ladder, timed sequentially.
    Compare,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::TemporalStudy => "temporal-study",
            Command::SpatialStudy => "spatial-study",
            Command::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    Ttgcn,
    Scn,
    #[default]
    Both,
}

impl SchemeChoice {
    pub fn schemes(&self) -> Vec<SchemeKind> {
        match self {
            SchemeChoice::Ttgcn => vec![SchemeKind::Ttgcn],
            SchemeChoice::Scn => vec![SchemeKind::Scn],
            SchemeChoice::Both => vec![SchemeKind::Ttgcn, SchemeKind::Scn],
        }
    }
}

/// Everything a run needs. Config files use these keys; absent keys take
/// the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub problem: ProblemName,
    /// One study block per value.
    pub alpha: Vec<f64>,
    /// Viscosity override; each problem's own value otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub scheme: SchemeChoice,
    pub nx: usize,
    pub ny: usize,
    /// Coarse steps, or the first rung of a temporal ladder.
    #[serde(rename = "N")]
    pub coarse_steps: usize,
    pub k: usize,
    /// Ladder length of the studies.
    pub levels: usize,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub linear_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear_max_iter: Option<usize>,
    pub norm: ErrorNorm,
    pub span: ErrorSpan,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ErrorProtocol>,
    pub coarse_forcing: CoarseForcing,
    pub parallel: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solver = SolverOptions::default();
        Self {
            command: None,
            problem: ProblemName::Example1,
            alpha: vec![0.5],
            mu: None,
            scheme: SchemeChoice::Both,
            nx: 100,
            ny: 100,
            coarse_steps: 16,
            k: 4,
            levels: 4,
            picard_tol: DEFAULT_PICARD_TOLERANCE,
            picard_max_iter: DEFAULT_PICARD_MAX_ITER,
            linear_tol: solver.linear_tol,
            linear_max_iter: None,
            norm: ErrorNorm::Max,
            span: ErrorSpan::AllLevels,
            reference: None,
            coarse_forcing: CoarseForcing::CoarseSlab,
            parallel: false,
            output: None,
            format: OutputFormat::Csv,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::Usage(format!("bad config file: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig serializes to TOML")
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            picard_tol: self.picard_tol,
            picard_max_iter: self.picard_max_iter,
            linear_tol: self.linear_tol,
            linear_max_iter: self.linear_max_iter,
        }
    }

    pub fn settings(&self) -> StudySettings {
        StudySettings {
            solver: self.solver(),
            coarse_forcing: self.coarse_forcing,
            norm: self.norm,
            span: self.span,
            protocol: self.reference,
            parallel: self.parallel,
        }
    }

    pub fn temporal_ladder(&self) -> Vec<usize> {
        (0..self.levels).map(|i| self.coarse_steps << i).collect()
    }

    pub fn spatial_ladder(&self) -> Vec<(usize, usize)> {
        (0..self.levels).map(|i| (self.nx << i, self.ny << i)).collect()
    }

    /// One problem per alpha; checks everything that can be checked
    /// without running.
    pub fn validate(&self) -> Result<Vec<ProblemSpec>, Failure> {
        let command = self
            .command
            .ok_or_else(|| Failure::Usage("no command given (run, temporal-study, spatial-study, compare)".into()))?;
        if self.alpha.is_empty() {
            return Err(Failure::Usage("at least one alpha is required".into()));
        }
        if self.levels == 0 || self.levels > 12 {
            return Err(Failure::Usage(format!("levels must lie in 1..=12, got {}", self.levels)));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(Failure::Usage(format!("need nx, ny >= 2, got {} x {}", self.nx, self.ny)));
        }
        if self.coarse_steps == 0 {
            return Err(Failure::Usage("N must be positive".into()));
        }
        if self.k < 2 {
            return Err(Failure::Usage(format!("k must be at least 2, got {}", self.k)));
        }
        if command == Command::Compare && self.scheme != SchemeChoice::Both {
            return Err(Failure::Usage("compare always runs both schemes; drop --scheme".into()));
        }
        self.solver().validate()?;
        let problems = self
            .alpha
            .iter()
            .map(|&a| self.problem.build(a, self.mu))
            .collect::<crate::Result<Vec<_>>>()?;
        if problems[0].exact.is_none() && self.reference != Some(ErrorProtocol::HalvedStep) {
            return Err(Failure::Usage(format!(
                "{} has no exact solution; pass --reference halved-step",
                self.problem
            )));
        }
        Ok(problems)
    }

    fn default_file_name(&self) -> String {
        let command = self.command.map_or("run", |c| c.as_str());
        format!("{command}-{}.{}", self.problem, self.format.extension())
    }

    /// Where the report goes; `None` means stdout.
    pub fn destination(&self, output_dir: Option<&Path>) -> Option<PathBuf> {
        match (&self.output, output_dir) {
            (Some(p), Some(dir)) if p.is_relative() => Some(dir.join(p)),
            (Some(p), _) => Some(p.clone()),
            (None, Some(dir)) => Some(dir.join(self.default_file_name())),
            (None, None) => None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ttgcn",
    version,
    about = "SCN and two-grid Crank-Nicolson solvers for 2D nonlinear Volterra integro-differential equations",
    after_help = "Flags override values read from --config. Reports go to stdout unless --output or \
                  TTGCN_OUTPUT_DIR is set.\nExit status: 0 success, 1 I/O failure, 2 usage or validation \
                  error, 3 numerical failure."
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Option<Command>,

    /// Flat TOML file with the same keys as the long flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    pub dump_config: bool,

    #[arg(long, value_parser = parse_problem)]
    pub problem: Option<ProblemName>,

    /// Kernel exponent(s) in (0, 1), comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub alpha: Option<Vec<f64>>,

    /// Viscosity override.
    #[arg(long)]
    pub mu: Option<f64>,

    #[arg(long, value_enum)]
    pub scheme: Option<SchemeChoice>,

    /// Cells in x [default: 100].
    #[arg(long)]
    pub nx: Option<usize>,

    /// Cells in y [default: 100].
    #[arg(long)]
    pub ny: Option<usize>,

    /// Coarse time steps; first rung of a temporal ladder [default: 16].
    #[arg(long = "N", value_name = "N")]
    pub coarse_steps: Option<usize>,

    /// Fine steps per coarse step [default: 4].
    #[arg(long)]
    pub k: Option<usize>,

    /// Ladder length of a study [default: 4].
    #[arg(long)]
    pub levels: Option<usize>,

    #[arg(long)]
    pub picard_tol: Option<f64>,

    #[arg(long)]
    pub picard_max_iter: Option<usize>,

    #[arg(long)]
    pub linear_tol: Option<f64>,

    #[arg(long)]
    pub linear_max_iter: Option<usize>,

    /// max or l2 [default: max].
    #[arg(long, value_parser = parse_norm)]
    pub norm: Option<ErrorNorm>,

    /// all-levels or final-time [default: all-levels].
    #[arg(long, value_parser = parse_span)]
    pub span: Option<ErrorSpan>,

    /// Error reference: exact or halved-step.
    #[arg(long, value_parser = parse_protocol)]
    pub reference: Option<ErrorProtocol>,

    /// coarse-slab or fine-slab [default: coarse-slab].
    #[arg(long, value_parser = parse_coarse_forcing)]
    pub coarse_forcing: Option<CoarseForcing>,

    /// Run ladder levels concurrently (timings become unreliable).
    #[arg(long)]
    pub parallel: bool,

    #[arg(long, short)]
    pub output: Option<PathBuf>,

    /// csv or json [default: csv].
    #[arg(long, value_parser = parse_format)]
    pub format: Option<OutputFormat>,
}

fn parse_problem(s: &str) -> std::result::Result<ProblemName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_norm(s: &str) -> std::result::Result<ErrorNorm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_span(s: &str) -> std::result::Result<ErrorSpan, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_protocol(s: &str) -> std::result::Result<ErrorProtocol, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_coarse_forcing(s: &str) -> std::result::Result<CoarseForcing, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<OutputFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Cli {
    /// Config file values, then flags on top.
    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml(&fs::read_to_string(path).map_err(Error::from)?)?,
            None => RunConfig::default(),
        };
        macro_rules! overlay {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = &self.$field { cfg.$target = v.clone(); })*
            };
        }
        overlay!(
            problem => problem,
            alpha => alpha,
            scheme => scheme,
            nx => nx,
            ny => ny,
            coarse_steps => coarse_steps,
            k => k,
            levels => levels,
            picard_tol => picard_tol,
            picard_max_iter => picard_max_iter,
            linear_tol => linear_tol,
            norm => norm,
            span => span,
            coarse_forcing => coarse_forcing,
            format => format,
        );
        if self.command.is_some() {
            cfg.command = self.command;
        }
        if self.mu.is_some() {
            cfg.mu = self.mu;
        }
        if self.linear_max_iter.is_some() {
            cfg.linear_max_iter = self.linear_max_iter;
        }
        if self.reference.is_some() {
            cfg.reference = self.reference;
        }
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        cfg.parallel |= self.parallel;
        Ok(cfg)
    }
}

/// Why a CLI invocation failed.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Solver(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Solver(e) if e.is_numeric() => EXIT_NUMERIC,
            Failure::Solver(e) => match e.root() {
                Error::Io(_) => EXIT_IO,
                Error::Domain(_)
                | Error::InvalidMesh(_)
                | Error::InvalidRatio(_)
                | Error::Protocol(_)
                | Error::UndefinedRate { .. } => EXIT_USAGE,
                _ => EXIT_IO,
            },
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(msg) => write!(f, "usage error: {msg}"),
            Failure::Solver(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

pub enum Report {
    Study(ConvergenceReport),
    Comparison(ComparisonReport),
}

impl Report {
    pub fn render(&self, format: OutputFormat) -> crate::Result<String> {
        match (self, format) {
            (Report::Study(r), OutputFormat::Csv) => r.to_csv_string(),
            (Report::Study(r), OutputFormat::Json) => r.to_json(),
            (Report::Comparison(r), OutputFormat::Csv) => r.to_csv_string(),
            (Report::Comparison(r), OutputFormat::Json) => r.to_json(),
        }
    }
}

/// Runs a validated config.
pub fn execute(cfg: &RunConfig) -> Result<Report, Failure> {
    let problems = cfg.validate()?;
    let command = cfg.command.expect("validated");
    let settings = cfg.settings();
    let schemes = cfg.scheme.schemes();
    let cells = (cfg.nx, cfg.ny);
    let mut report: Option<Report> = None;
    for p in &problems {
        let next = match command {
            Command::Run => {
                Report::Study(run_temporal_study(p, &schemes, cells, cfg.k, &[cfg.coarse_steps], &settings)?)
            }
            Command::TemporalStudy => Report::Study(run_temporal_study(
                p,
                &schemes,
                cells,
                cfg.k,
                &cfg.temporal_ladder(),
                &settings,
            )?),
            Command::SpatialStudy => Report::Study(run_spatial_study(
                p,
                &schemes,
                cfg.coarse_steps,
                cfg.k,
                &cfg.spatial_ladder(),
                &settings,
            )?),
            Command::Compare => {
                Report::Comparison(compare_schemes(p, cells, cfg.k, &cfg.temporal_ladder(), &settings)?)
            }
        };
        report = Some(match (report, next) {
            (None, next) => next,
            (Some(Report::Study(mut a)), Report::Study(b)) => {
                a.merge(b)?;
                Report::Study(a)
            }
            (Some(Report::Comparison(mut a)), Report::Comparison(b)) => {
                a.merge(b)?;
                Report::Comparison(a)
            }
            _ => unreachable!("one command per invocation"),
        });
    }
    Ok(report.expect("at least one alpha"))
}

fn try_main(cli: &Cli) -> Result<(), Failure> {
    let cfg = cli.resolve()?;
    if cli.dump_config {
        cfg.validate()?;
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let report = execute(&cfg)?;
    let text = report.render(cfg.format)?;
    let dir = env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
    match cfg.destination(dir.as_deref()) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(Error::from)?;
            }
            fs::write(&path, text).map_err(Error::from)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match try_main(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("ttgcn: {f}");
            f.exit_code()
        }
    }
}
