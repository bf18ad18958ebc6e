//! Errors, convergence rates, refinement studies and scheme comparisons,
//! with CSV and JSON persistence.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{l2_norm, max_norm, GridFunction, SpatialMesh, TemporalPair};
use crate::problems::ProblemSpec;
use crate::schemes::{run_scn, run_ttgcn, CoarseForcing, SchemeConfig, SolverOptions, Trajectory};

/// CSV column order of [`ConvergenceReport::write_csv`].
pub const CSV_HEADER: [&str; 9] = [
    "scheme",
    "alpha",
    "k",
    "tau_C",
    "tau_F",
    "h",
    "error",
    "rate",
    "cpu_seconds",
];

/// Grid norm used for `E = max_n ||u^n - U^n||`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorNorm {
    /// `sqrt(h1 h2 sum e_ij^2)`.
    L2,
    /// `max_ij |e_ij|`. The reference error tables are in this norm.
    #[default]
    Max,
}

impl ErrorNorm {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorNorm::L2 => "l2",
            ErrorNorm::Max => "max",
        }
    }

    pub fn eval(&self, e: &GridFunction) -> f64 {
        match self {
            ErrorNorm::L2 => l2_norm(e),
            ErrorNorm::Max => max_norm(e),
        }
    }
}

impl fmt::Display for ErrorNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(ErrorNorm::L2),
            "max" => Ok(ErrorNorm::Max),
            other => Err(Error::Domain(format!("unknown norm '{other}'"))),
        }
    }
}

/// How the error of a run is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorProtocol {
    /// Against the exact solution at every fine level.
    Exact,
    /// Against a run of the same scheme with `tau_C` and `tau_F` halved.
    HalvedStep,
}

impl ErrorProtocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorProtocol::Exact => "exact",
            ErrorProtocol::HalvedStep => "halved-step",
        }
    }
}

impl fmt::Display for ErrorProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ErrorProtocol::Exact),
            "halved-step" => Ok(ErrorProtocol::HalvedStep),
            other => Err(Error::Domain(format!("unknown reference protocol '{other}'"))),
        }
    }
}

/// Which time levels enter the error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorSpan {
    /// `max_{1 <= n <= steps}`.
    #[default]
    AllLevels,
    /// Only `n = steps`, i.e. `t = T`. The self-referenced reference table
    /// is in this form.
    FinalTime,
}

impl ErrorSpan {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorSpan::AllLevels => "all-levels",
            ErrorSpan::FinalTime => "final-time",
        }
    }

    fn levels(&self, last: usize) -> std::ops::RangeInclusive<usize> {
        match self {
            ErrorSpan::AllLevels => 1..=last,
            ErrorSpan::FinalTime => last..=last,
        }
    }
}

impl fmt::Display for ErrorSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorSpan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-levels" => Ok(ErrorSpan::AllLevels),
            "final-time" => Ok(ErrorSpan::FinalTime),
            other => Err(Error::Domain(format!("unknown error span '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "TTGCN")]
    Ttgcn,
    #[serde(rename = "SCN")]
    Scn,
}

impl SchemeKind {
    pub fn tag(&self) -> &'static str {
        match self {
            SchemeKind::Ttgcn => "TTGCN",
            SchemeKind::Scn => "SCN",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyAxis {
    Temporal,
    Spatial,
}

/// `E = max_{1 <= n <= steps} ||u(t_n) - U^n||` in the discrete L2 norm.
pub fn discrete_error(traj: &Trajectory, p: &ProblemSpec) -> Result<f64> {
    discrete_error_in(traj, p, ErrorNorm::L2)
}

/// [`discrete_error`] in a chosen norm.
pub fn discrete_error_in(traj: &Trajectory, p: &ProblemSpec, norm: ErrorNorm) -> Result<f64> {
    discrete_error_over(traj, p, norm, ErrorSpan::AllLevels)
}

/// [`discrete_error_in`] restricted to the levels of `span`.
pub fn discrete_error_over(traj: &Trajectory, p: &ProblemSpec, norm: ErrorNorm, span: ErrorSpan) -> Result<f64> {
    if p.exact.is_none() {
        return Err(Error::Protocol(format!(
            "problem '{}' has no exact solution; use the halved-step reference",
            p.name
        )));
    }
    let mut worst: f64 = 0.0;
    for n in span.levels(traj.completed()) {
        let exact = p.exact_grid(traj.mesh(), traj.times()[n]).expect("checked above");
        worst = worst.max(norm.eval(&exact.sub(traj.snapshot(n))?));
    }
    Ok(worst)
}

/// `max_n ||U^n - V^{2n}||` against a reference `V` with half the step,
/// in the discrete L2 norm.
pub fn reference_error(traj: &Trajectory, reference: &Trajectory) -> Result<f64> {
    reference_error_in(traj, reference, ErrorNorm::L2)
}

/// [`reference_error`] in a chosen norm.
pub fn reference_error_in(traj: &Trajectory, reference: &Trajectory, norm: ErrorNorm) -> Result<f64> {
    reference_error_over(traj, reference, norm, ErrorSpan::AllLevels)
}

/// [`reference_error_in`] restricted to the levels of `span`.
pub fn reference_error_over(
    traj: &Trajectory,
    reference: &Trajectory,
    norm: ErrorNorm,
    span: ErrorSpan,
) -> Result<f64> {
    if traj.mesh() != reference.mesh() {
        return Err(Error::Protocol("reference lives on a different spatial mesh".into()));
    }
    if reference.steps() != 2 * traj.steps() || !traj.is_complete() || !reference.is_complete() {
        return Err(Error::Protocol(format!(
            "reference with {} steps does not halve a run of {} steps",
            reference.steps(),
            traj.steps()
        )));
    }
    let mut worst: f64 = 0.0;
    for n in span.levels(traj.steps()) {
        if traj.times()[n] != reference.times()[2 * n] {
            return Err(Error::Protocol(format!(
                "time meshes are not nested at level {n}: {} vs {}",
                traj.times()[n],
                reference.times()[2 * n]
            )));
        }
        worst = worst.max(norm.eval(&traj.snapshot(n).sub(reference.snapshot(2 * n))?));
    }
    Ok(worst)
}

/// `log2(e_coarse / e_fine)`.
pub fn convergence_rate(e_coarse: f64, e_fine: f64) -> Result<f64> {
    if !(e_coarse > 0.0 && e_fine > 0.0 && e_coarse.is_finite() && e_fine.is_finite()) {
        return Err(Error::UndefinedRate {
            coarse: e_coarse,
            fine: e_fine,
        });
    }
    Ok((e_coarse / e_fine).log2())
}

/// Knobs shared by every study driver.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StudySettings {
    pub solver: SolverOptions,
    pub coarse_forcing: CoarseForcing,
    pub norm: ErrorNorm,
    pub span: ErrorSpan,
    /// `None` picks [`ErrorProtocol::Exact`] when the problem has an exact
    /// solution and fails otherwise.
    pub protocol: Option<ErrorProtocol>,
    /// Run ladder levels concurrently. Timings are then not comparable.
    pub parallel: bool,
}

impl StudySettings {
    fn resolve_protocol(&self, p: &ProblemSpec) -> Result<ErrorProtocol> {
        match (self.protocol, p.exact.is_some()) {
            (Some(ErrorProtocol::Exact), false) | (None, false) => Err(Error::Protocol(format!(
                "problem '{}' has no exact solution; request the halved-step reference",
                p.name
            ))),
            (Some(protocol), _) => Ok(protocol),
            (None, true) => Ok(ErrorProtocol::Exact),
        }
    }

    fn scheme_config(&self, pair: TemporalPair, mesh: SpatialMesh) -> SchemeConfig {
        SchemeConfig {
            pair,
            mesh,
            solver: self.solver,
            coarse_forcing: self.coarse_forcing,
        }
    }
}

/// One row of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub scheme: SchemeKind,
    pub alpha: f64,
    pub k: usize,
    #[serde(rename = "tau_C")]
    pub tau_c: f64,
    #[serde(rename = "tau_F")]
    pub tau_f: f64,
    pub h: f64,
    pub error: f64,
    /// Absent on the first level of a ladder, or when an error is zero.
    pub rate: Option<f64>,
    pub cpu_seconds: f64,
    pub linear_iterations: usize,
    pub picard_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub problem: String,
    pub mu: f64,
    pub axis: StudyAxis,
    pub norm: ErrorNorm,
    #[serde(default)]
    pub span: ErrorSpan,
    pub protocol: ErrorProtocol,
    pub coarse_forcing: CoarseForcing,
    pub picard_tolerance: f64,
    pub linear_tolerance: f64,
    pub records: Vec<LevelRecord>,
}

impl ConvergenceReport {
    pub fn records_for(&self, scheme: SchemeKind) -> Vec<&LevelRecord> {
        self.records.iter().filter(|r| r.scheme == scheme).collect()
    }

    pub fn errors(&self, scheme: SchemeKind) -> Vec<f64> {
        self.records_for(scheme).iter().map(|r| r.error).collect()
    }

    pub fn rates(&self, scheme: SchemeKind) -> Vec<Option<f64>> {
        self.records_for(scheme).iter().map(|r| r.rate).collect()
    }

    /// Distinct `(scheme, alpha)` pairs in order of first appearance.
    pub fn blocks(&self) -> Vec<(SchemeKind, f64)> {
        let mut out: Vec<(SchemeKind, f64)> = Vec::new();
        for r in &self.records {
            if !out.contains(&(r.scheme, r.alpha)) {
                out.push((r.scheme, r.alpha));
            }
        }
        out
    }

    /// Appends the records of a study of the same kind, e.g. another alpha.
    pub fn merge(&mut self, other: ConvergenceReport) -> Result<()> {
        if other.problem != self.problem || other.axis != self.axis || other.protocol != self.protocol {
            return Err(Error::Protocol("cannot merge reports of different studies".into()));
        }
        self.records.extend(other.records);
        Ok(())
    }

    pub fn total_linear_iterations(&self) -> usize {
        self.records.iter().map(|r| r.linear_iterations).sum()
    }

    /// Checks that every stored rate is `log2` of the stored error ratio
    /// within its `(scheme, alpha)` block.
    pub fn verify_rates(&self) -> Result<()> {
        for (scheme, alpha) in self.blocks() {
            let rows: Vec<&LevelRecord> = self
                .records
                .iter()
                .filter(|r| r.scheme == scheme && r.alpha == alpha)
                .collect();
            for (i, row) in rows.iter().enumerate() {
                let expected = if i == 0 {
                    None
                } else {
                    convergence_rate(rows[i - 1].error, row.error).ok()
                };
                let consistent = match (row.rate, expected) {
                    (None, None) => true,
                    (Some(a), Some(b)) => (a - b).abs() <= 1e-10,
                    _ => false,
                };
                if !consistent {
                    return Err(Error::Protocol(format!(
                        "{scheme} alpha {alpha} level {i}: stored rate {:?} disagrees with errors",
                        row.rate
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).map_err(csv_error)?;
        for r in &self.records {
            w.write_record([
                r.scheme.tag().to_string(),
                float(r.alpha),
                r.k.to_string(),
                float(r.tau_c),
                float(r.tau_f),
                float(r.h),
                float(r.error),
                r.rate.map_or_else(|| "NA".to_string(), float),
                float(r.cpu_seconds),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Protocol(e.to_string()))
    }

    pub fn save(&self, path: &Path, format: OutputFormat) -> Result<()> {
        let text = match format {
            OutputFormat::Csv => self.to_csv_string()?,
            OutputFormat::Json => self.to_json()?,
        };
        fs::write(path, text)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Domain(format!("unknown output format '{other}'"))),
        }
    }
}

/// 17 significant digits.
fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Protocol(format!("{other:?}")),
    }
}

/// Ladders must double at every step.
pub fn check_ladder(ladder: &[usize]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::Domain("empty refinement ladder".into()));
    }
    if ladder[0] == 0 {
        return Err(Error::Domain("ladder entries must be positive".into()));
    }
    for w in ladder.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(Error::Domain(format!(
                "ladder must double at every level, found {} -> {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// A finished scheme run with its wall-clock time.
struct TimedRun {
    traj: Trajectory,
    cpu_seconds: f64,
    linear_iterations: usize,
    picard_iterations: usize,
}

fn timed_run(p: &ProblemSpec, scheme: SchemeKind, cfg: &SchemeConfig) -> Result<TimedRun> {
    match scheme {
        SchemeKind::Scn => {
            let start = Instant::now();
            let traj = run_scn(p, cfg)?;
            let cpu_seconds = start.elapsed().as_secs_f64();
            Ok(TimedRun {
                linear_iterations: traj.total_linear_iterations(),
                picard_iterations: traj.total_picard_iterations(),
                traj,
                cpu_seconds,
            })
        }
        SchemeKind::Ttgcn => {
            let start = Instant::now();
            let run = run_ttgcn(p, cfg)?;
            let cpu_seconds = start.elapsed().as_secs_f64();
            Ok(TimedRun {
                linear_iterations: run.fine.total_linear_iterations() + run.coarse.total_linear_iterations(),
                picard_iterations: run.fine.total_picard_iterations() + run.coarse.total_picard_iterations(),
                traj: run.fine,
                cpu_seconds,
            })
        }
    }
}

/// One level of a study: the measured run and, for the halved-step
/// protocol, its reference configuration.
struct Job {
    level: usize,
    scheme: SchemeKind,
    cfg: SchemeConfig,
    reference: Option<SchemeConfig>,
}

fn run_job(p: &ProblemSpec, job: &Job, norm: ErrorNorm, span: ErrorSpan) -> Result<LevelRecord> {
    let measured = timed_run(p, job.scheme, &job.cfg)?;
    let error = match &job.reference {
        None => discrete_error_over(&measured.traj, p, norm, span)?,
        Some(cfg) => {
            let reference = timed_run(p, job.scheme, cfg)?;
            reference_error_over(&measured.traj, &reference.traj, norm, span)?
        }
    };
    Ok(LevelRecord {
        scheme: job.scheme,
        alpha: p.alpha,
        k: job.cfg.pair.ratio(),
        tau_c: job.cfg.pair.tau_coarse(),
        tau_f: job.cfg.pair.tau_fine(),
        h: job.cfg.mesh.h(),
        error,
        rate: None,
        cpu_seconds: measured.cpu_seconds,
        linear_iterations: measured.linear_iterations,
        picard_iterations: measured.picard_iterations,
    })
}

fn run_jobs(p: &ProblemSpec, jobs: &[Job], settings: &StudySettings) -> Result<Vec<LevelRecord>> {
    let one = |job: &Job| run_job(p, job, settings.norm, settings.span).map_err(|e| e.at_ladder_level(job.level));
    let mut records = if settings.parallel {
        jobs.par_iter().map(one).collect::<Result<Vec<_>>>()?
    } else {
        jobs.iter().map(one).collect::<Result<Vec<_>>>()?
    };
    fill_rates(&mut records);
    Ok(records)
}

/// Rates within each scheme's rows, in ladder order.
fn fill_rates(records: &mut [LevelRecord]) {
    for scheme in [SchemeKind::Ttgcn, SchemeKind::Scn] {
        let mut prev: Option<f64> = None;
        for r in records.iter_mut().filter(|r| r.scheme == scheme) {
            r.rate = prev.and_then(|e| convergence_rate(e, r.error).ok());
            prev = Some(r.error);
        }
    }
}

fn dedup_schemes(schemes: &[SchemeKind]) -> Result<Vec<SchemeKind>> {
    let mut out: Vec<SchemeKind> = Vec::new();
    for s in schemes {
        if !out.contains(s) {
            out.push(*s);
        }
    }
    if out.is_empty() {
        return Err(Error::Domain("no scheme selected".into()));
    }
    Ok(out)
}

fn report(
    p: &ProblemSpec,
    axis: StudyAxis,
    protocol: ErrorProtocol,
    settings: &StudySettings,
    records: Vec<LevelRecord>,
) -> ConvergenceReport {
    ConvergenceReport {
        problem: p.name.clone(),
        mu: p.mu,
        axis,
        norm: settings.norm,
        span: settings.span,
        protocol,
        coarse_forcing: settings.coarse_forcing,
        picard_tolerance: settings.solver.picard_tol,
        linear_tolerance: settings.solver.linear_tol,
        records,
    }
}

/// Temporal refinement on a fixed `mx x my` mesh: `N` runs over `ladder`
/// with `tau_F = tau_C / k`.
pub fn run_temporal_study(
    p: &ProblemSpec,
    schemes: &[SchemeKind],
    (mx, my): (usize, usize),
    k: usize,
    ladder: &[usize],
    settings: &StudySettings,
) -> Result<ConvergenceReport> {
    check_ladder(ladder)?;
    settings.solver.validate()?;
    let protocol = settings.resolve_protocol(p)?;
    let mesh = p.spatial_mesh(mx, my)?;
    let mut jobs = Vec::new();
    for scheme in dedup_schemes(schemes)? {
        for (level, &n) in ladder.iter().enumerate() {
            let pair = TemporalPair::new(p.t_final, n, k)?;
            let reference = (protocol == ErrorProtocol::HalvedStep)
                .then(|| settings.scheme_config(pair.halved(), mesh));
            jobs.push(Job {
                level,
                scheme,
                cfg: settings.scheme_config(pair, mesh),
                reference,
            });
        }
    }
    Ok(report(p, StudyAxis::Temporal, protocol, settings, run_jobs(p, &jobs, settings)?))
}

/// Spatial refinement with a fixed time pair over `(mx, my)` meshes that
/// double in both directions.
pub fn run_spatial_study(
    p: &ProblemSpec,
    schemes: &[SchemeKind],
    coarse_steps: usize,
    k: usize,
    ladder: &[(usize, usize)],
    settings: &StudySettings,
) -> Result<ConvergenceReport> {
    let xs: Vec<usize> = ladder.iter().map(|c| c.0).collect();
    let ys: Vec<usize> = ladder.iter().map(|c| c.1).collect();
    check_ladder(&xs)?;
    check_ladder(&ys)?;
    settings.solver.validate()?;
    let protocol = settings.resolve_protocol(p)?;
    let pair = TemporalPair::new(p.t_final, coarse_steps, k)?;
    let mut jobs = Vec::new();
    for scheme in dedup_schemes(schemes)? {
        for (level, &(mx, my)) in ladder.iter().enumerate() {
            let mesh = p.spatial_mesh(mx, my)?;
            let reference = (protocol == ErrorProtocol::HalvedStep)
                .then(|| settings.scheme_config(pair.halved(), mesh));
            jobs.push(Job {
                level,
                scheme,
                cfg: settings.scheme_config(pair, mesh),
                reference,
            });
        }
    }
    Ok(report(p, StudyAxis::Spatial, protocol, settings, run_jobs(p, &jobs, settings)?))
}

/// Paired TTGCN/SCN results of one ladder level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub alpha: f64,
    pub k: usize,
    #[serde(rename = "tau_C")]
    pub tau_c: f64,
    #[serde(rename = "tau_F")]
    pub tau_f: f64,
    pub h: f64,
    pub error_ttgcn: f64,
    pub error_scn: f64,
    pub cpu_ttgcn: f64,
    pub cpu_scn: f64,
    /// `cpu_scn / cpu_ttgcn`.
    pub speedup: f64,
    /// `|E_TTGCN - E_SCN| / E_SCN`.
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub study: ConvergenceReport,
}

impl ComparisonReport {
    pub fn merge(&mut self, other: ComparisonReport) -> Result<()> {
        self.study.merge(other.study)?;
        self.rows.extend(other.rows);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "alpha",
            "k",
            "tau_C",
            "tau_F",
            "h",
            "error_TTGCN",
            "error_SCN",
            "cpu_TTGCN",
            "cpu_SCN",
            "speedup",
            "relative_gap",
        ])
        .map_err(csv_error)?;
        for r in &self.rows {
            w.write_record([
                float(r.alpha),
                r.k.to_string(),
                float(r.tau_c),
                float(r.tau_f),
                float(r.h),
                float(r.error_ttgcn),
                float(r.error_scn),
                float(r.cpu_ttgcn),
                float(r.cpu_scn),
                float(r.speedup),
                float(r.relative_gap),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Protocol(e.to_string()))
    }

    pub fn save(&self, path: &Path, format: OutputFormat) -> Result<()> {
        let text = match format {
            OutputFormat::Csv => self.to_csv_string()?,
            OutputFormat::Json => self.to_json()?,
        };
        fs::write(path, text)?;
        Ok(())
    }
}

/// Runs both schemes over a temporal ladder, always sequentially so the
/// timings are comparable, and pairs them level by level.
pub fn compare_schemes(
    p: &ProblemSpec,
    cells: (usize, usize),
    k: usize,
    ladder: &[usize],
    settings: &StudySettings,
) -> Result<ComparisonReport> {
    let sequential = StudySettings {
        parallel: false,
        ..*settings
    };
    let study = run_temporal_study(p, &[SchemeKind::Ttgcn, SchemeKind::Scn], cells, k, ladder, &sequential)?;
    let two = study.records_for(SchemeKind::Ttgcn);
    let scn = study.records_for(SchemeKind::Scn);
    let rows = two
        .iter()
        .zip(&scn)
        .map(|(a, b)| ComparisonRow {
            alpha: a.alpha,
            k: a.k,
            tau_c: a.tau_c,
            tau_f: a.tau_f,
            h: a.h,
            error_ttgcn: a.error,
            error_scn: b.error,
            cpu_ttgcn: a.cpu_seconds,
            cpu_scn: b.cpu_seconds,
            speedup: b.cpu_seconds / a.cpu_seconds,
            relative_gap: (a.error - b.error).abs() / b.error,
        })
        .collect();
    Ok(ComparisonReport { rows, study })
}
