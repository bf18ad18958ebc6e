//! Time marching: the standard Crank-Nicolson scheme (SCN) and the temporal
//! two-grid Crank-Nicolson scheme (TTGCN).
//!
//! Both share one stepping engine, [`SchemeState`]. Level `n` solves
//!
//! ```text
//! (1/tau) U^n - c_n Delta_h U^n - D (.) U^n = RHS
//! ```
//!
//! with `c_1 = mu + w[1][1]` and `c_n = (mu + w[n][n]) / 2` for `n >= 2`.
//! SCN treats `g(U^n)/2` by Picard iteration (`D = 0`); the TTGCN fine steps
//! linearize `g` about the interpolated coarse solution and need one linear
//! solve per level.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsolve::{default_max_iter, solve_from, StepOperator, DEFAULT_TOLERANCE};
use crate::mesh::{l2_norm, node_time, GridFunction, SpatialMesh, TemporalPair};
use crate::problems::{forcing_slab_average, ProblemSpec};
use crate::quadrature::{lag_weights, HalfStepHistory};
use crate::stencil::apply_laplacian;

pub const DEFAULT_PICARD_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_PICARD_MAX_ITER: usize = 100;

/// Which time window supplies the forcing average of a coarse level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoarseForcing {
    /// `(1/tau_C) int_{t_{(s-1)k}}^{t_{sk}} f dt`.
    #[default]
    CoarseSlab,
    /// `(1/tau_F) int_{t_{sk-1}}^{t_{sk}} f dt`, the last fine slab only.
    FineSlab,
}

impl CoarseForcing {
    pub fn as_str(&self) -> &'static str {
        match self {
            CoarseForcing::CoarseSlab => "coarse-slab",
            CoarseForcing::FineSlab => "fine-slab",
        }
    }
}

impl fmt::Display for CoarseForcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoarseForcing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarse-slab" => Ok(CoarseForcing::CoarseSlab),
            "fine-slab" => Ok(CoarseForcing::FineSlab),
            other => Err(Error::Domain(format!("unknown coarse forcing '{other}'"))),
        }
    }
}

/// Tolerances for the nonlinear and linear solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Relative residual target of each linear solve.
    pub linear_tol: f64,
    /// `None` selects [`default_max_iter`] for the mesh.
    pub linear_max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            picard_tol: DEFAULT_PICARD_TOLERANCE,
            picard_max_iter: DEFAULT_PICARD_MAX_ITER,
            linear_tol: DEFAULT_TOLERANCE,
            linear_max_iter: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, tol) in [("Picard", self.picard_tol), ("linear", self.linear_tol)] {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::Domain(format!("{name} tolerance must be positive, got {tol}")));
            }
        }
        if self.picard_max_iter == 0 || self.linear_max_iter == Some(0) {
            return Err(Error::Domain("iteration caps must be at least 1".into()));
        }
        Ok(())
    }

    fn linear_cap(&self, mesh: &SpatialMesh) -> usize {
        self.linear_max_iter.unwrap_or_else(|| default_max_iter(mesh))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub pair: TemporalPair,
    pub mesh: SpatialMesh,
    pub solver: SolverOptions,
    pub coarse_forcing: CoarseForcing,
}

impl SchemeConfig {
    pub fn new(pair: TemporalPair, mesh: SpatialMesh) -> Self {
        Self {
            pair,
            mesh,
            solver: SolverOptions::default(),
            coarse_forcing: CoarseForcing::default(),
        }
    }

    /// Square mesh with `m` intervals per side on the problem's domain and
    /// `N = coarse_steps`, `k = ratio` over the problem's final time.
    pub fn for_problem(p: &ProblemSpec, m: usize, coarse_steps: usize, ratio: usize) -> Result<Self> {
        Ok(Self::new(
            TemporalPair::new(p.t_final, coarse_steps, ratio)?,
            p.spatial_mesh(m, m)?,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()
    }

    fn check_against(&self, p: &ProblemSpec) -> Result<()> {
        self.validate()?;
        if self.pair.t_final() != p.t_final {
            return Err(Error::Domain(format!(
                "time mesh ends at {} but the problem runs to {}",
                self.pair.t_final(),
                p.t_final
            )));
        }
        if self.mesh.lx() != p.lx || self.mesh.ly() != p.ly {
            return Err(Error::InvalidMesh(format!(
                "mesh covers {} x {} but the problem domain is {} x {}",
                self.mesh.lx(),
                self.mesh.ly(),
                p.lx,
                p.ly
            )));
        }
        Ok(())
    }
}

/// Solver statistics of one time level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepStats {
    pub level: usize,
    pub picard_iterations: usize,
    pub linear_iterations: usize,
    /// Relative residual of the final linear solve.
    pub relative_residual: f64,
}

/// Snapshots `U^0 .. U^steps` on a uniform time mesh.
#[derive(Debug, Clone)]
pub struct Trajectory {
    t_final: f64,
    times: Vec<f64>,
    snapshots: Vec<GridFunction>,
    stats: Vec<StepStats>,
}

impl Trajectory {
    fn start(t_final: f64, steps: usize, u0: GridFunction) -> Self {
        let mut snapshots = Vec::with_capacity(steps + 1);
        snapshots.push(u0);
        Self {
            t_final,
            times: (0..=steps).map(|n| node_time(t_final, steps, n)).collect(),
            snapshots,
            stats: Vec::with_capacity(steps),
        }
    }

    /// Number of time steps of the underlying mesh.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Number of levels computed so far, excluding `U^0`.
    pub fn completed(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn is_complete(&self) -> bool {
        self.snapshots.len() == self.times.len()
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.steps() as f64
    }

    pub fn mesh(&self) -> &SpatialMesh {
        self.snapshots[0].mesh()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[GridFunction] {
        &self.snapshots
    }

    /// `U^n`.
    pub fn snapshot(&self, n: usize) -> &GridFunction {
        &self.snapshots[n]
    }

    pub fn last(&self) -> &GridFunction {
        self.snapshots.last().expect("trajectory holds U^0")
    }

    pub fn stats(&self) -> &[StepStats] {
        &self.stats
    }

    pub fn total_linear_iterations(&self) -> usize {
        self.stats.iter().map(|s| s.linear_iterations).sum()
    }

    pub fn total_picard_iterations(&self) -> usize {
        self.stats.iter().map(|s| s.picard_iterations).sum()
    }

    pub fn max_picard_iterations(&self) -> usize {
        self.stats.iter().map(|s| s.picard_iterations).max().unwrap_or(0)
    }
}

/// Result of [`picard_iterate`].
#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub solution: GridFunction,
    pub iterations: usize,
    pub linear_iterations: usize,
    pub last_increment: f64,
    pub relative_residual: f64,
}

/// Fixed-point iteration `u <- op^{-1} rhs(u)` from `guess`, stopped once
/// `||u_new - u|| <= tol * max(1, ||u_new||)`.
///
/// With `depends_on_iterate == false` the right-hand side is frozen and a
/// single solve is performed.
pub fn picard_iterate<F>(
    mut assemble_rhs: F,
    op: &StepOperator,
    guess: &GridFunction,
    opts: &SolverOptions,
    depends_on_iterate: bool,
) -> Result<PicardOutcome>
where
    F: FnMut(&GridFunction) -> Result<GridFunction>,
{
    opts.validate()?;
    let cap = opts.linear_cap(guess.mesh());
    let mut u = guess.clone();
    let mut linear_iterations = 0;
    let mut last_increment = f64::INFINITY;
    for iteration in 1..=opts.picard_max_iter {
        let rhs = assemble_rhs(&u)?;
        let (next, report) = solve_from(op, &rhs, &u, opts.linear_tol, cap)?;
        linear_iterations += report.iterations;
        last_increment = l2_norm(&next.sub(&u)?);
        u = next;
        let converged = last_increment <= opts.picard_tol * l2_norm(&u).max(1.0);
        if !depends_on_iterate || converged {
            return Ok(PicardOutcome {
                solution: u,
                iterations: iteration,
                linear_iterations,
                last_increment,
                relative_residual: report.relative_residual,
            });
        }
        if !last_increment.is_finite() {
            break;
        }
    }
    Err(Error::PicardNonConvergence {
        iterations: opts.picard_max_iter,
        last_increment,
    })
}

#[derive(Debug, Clone, Copy)]
enum ForcingWindow {
    Slab,
    /// Last `1/k` of each slab.
    TrailingFraction(usize),
}

/// Marching state for one uniform time mesh: current level, its Laplacian
/// and the stored memory arguments.
#[derive(Debug)]
pub struct SchemeState<'a> {
    problem: &'a ProblemSpec,
    mesh: SpatialMesh,
    steps: usize,
    tau: f64,
    lags: Vec<f64>,
    window: ForcingWindow,
    u: GridFunction,
    lap: GridFunction,
    history: HalfStepHistory,
    trajectory: Trajectory,
}

impl<'a> SchemeState<'a> {
    /// Starts at `U^0 = psi` on a mesh of `steps` uniform steps over
    /// `[0, t_final]`.
    pub fn new(problem: &'a ProblemSpec, mesh: SpatialMesh, t_final: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidMesh("need at least one time step".into()));
        }
        let tau = t_final / steps as f64;
        let lags = lag_weights(steps, tau, problem.alpha)?;
        let u = problem.initial_grid(&mesh);
        if !u.is_finite() {
            return Err(Error::Domain("initial data is not finite".into()));
        }
        let lap = apply_laplacian(&u);
        Ok(Self {
            problem,
            mesh,
            steps,
            tau,
            lags,
            window: ForcingWindow::Slab,
            trajectory: Trajectory::start(t_final, steps, u.clone()),
            u,
            lap,
            history: HalfStepHistory::with_capacity(steps),
        })
    }

    fn with_window(mut self, window: ForcingWindow) -> Self {
        self.window = window;
        self
    }

    /// Index of the most recently computed level.
    pub fn level(&self) -> usize {
        self.trajectory.completed()
    }

    pub fn current(&self) -> &GridFunction {
        &self.u
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.trajectory
    }

    /// Laplacian coefficient of the level-`n` operator: full at `n = 1`,
    /// halved afterwards.
    pub fn coefficient(&self, n: usize) -> f64 {
        let diag = self.lags[0];
        if n == 1 {
            self.problem.mu + diag
        } else {
            0.5 * (self.problem.mu + diag)
        }
    }

    /// Operator of level `n` with optional diagonal shift.
    pub fn operator(&self, n: usize, shift: Option<GridFunction>) -> Result<StepOperator> {
        StepOperator::new(1.0 / self.tau, self.coefficient(n), shift)
    }

    fn forcing(&self, n: usize) -> Result<GridFunction> {
        let t_final = self.trajectory.t_final;
        let hi = node_time(t_final, self.steps, n);
        let lo = match self.window {
            ForcingWindow::Slab => node_time(t_final, self.steps, n - 1),
            ForcingWindow::TrailingFraction(k) => node_time(t_final, self.steps * k, n * k - 1),
        };
        forcing_slab_average(self.problem, &self.mesh, lo, hi)
    }

    /// Everything on the right of level `n` that does not involve `U^n`.
    fn explicit_rhs(&self, n: usize) -> Result<GridFunction> {
        let mut rhs = self.u.scaled(1.0 / self.tau);
        if n >= 2 {
            rhs.axpy(self.coefficient(n), &self.lap)?;
            let weights: Vec<f64> = (1..n).map(|m| self.lags[n - m]).collect();
            rhs.axpy(1.0, &self.history.weighted_sum(&weights)?)?;
        }
        rhs.axpy(1.0, &self.forcing(n)?)?;
        if !self.problem.nonlinearity.is_zero() {
            rhs.axpy(0.5, &self.problem.nonlinearity.apply(&self.u))?;
        }
        Ok(rhs)
    }

    fn accept(&mut self, u: GridFunction, stats: StepStats) -> Result<()> {
        if !u.is_finite() {
            return Err(Error::Domain(format!("non-finite solution at level {}", stats.level)));
        }
        let lap = apply_laplacian(&u);
        if self.history.is_empty() {
            self.history.push(lap.clone())?;
        } else {
            self.history.push(lap.zip_map(&self.lap, |a, b| 0.5 * (a + b))?)?;
        }
        self.lap = lap;
        self.u = u.clone();
        self.trajectory.snapshots.push(u);
        self.trajectory.stats.push(stats);
        Ok(())
    }

    fn next_level(&self, first: bool) -> Result<usize> {
        let n = self.level() + 1;
        if n > self.steps {
            return Err(Error::Index(format!("all {} levels already computed", self.steps)));
        }
        if first != (n == 1) {
            return Err(Error::Index(format!(
                "{} step requested but the next level is {n}",
                if first { "first" } else { "later" }
            )));
        }
        Ok(n)
    }

    fn implicit_advance(&mut self, n: usize, opts: &SolverOptions) -> Result<&GridFunction> {
        let op = self.operator(n, None)?;
        let fixed = self.explicit_rhs(n)?;
        let g = &self.problem.nonlinearity;
        let nonlinear = !g.is_zero();
        let outcome = picard_iterate(
            |u| {
                if !nonlinear {
                    return Ok(fixed.clone());
                }
                let mut rhs = fixed.clone();
                rhs.axpy(0.5, &g.apply(u))?;
                Ok(rhs)
            },
            &op,
            &self.u,
            opts,
            nonlinear,
        )?;
        let stats = StepStats {
            level: n,
            picard_iterations: outcome.iterations,
            linear_iterations: outcome.linear_iterations,
            relative_residual: outcome.relative_residual,
        };
        self.accept(outcome.solution, stats)?;
        Ok(&self.u)
    }

    fn linearized_advance(
        &mut self,
        n: usize,
        anchor: &GridFunction,
        opts: &SolverOptions,
    ) -> Result<&GridFunction> {
        anchor.check_same_mesh(&self.u)?;
        opts.validate()?;
        let g = &self.problem.nonlinearity;
        let mut rhs = self.explicit_rhs(n)?;
        let shift = if g.is_zero() {
            None
        } else {
            let dg = g.apply_derivative(anchor);
            let remainder = g.apply(anchor).zip_map(&dg.zip_map(anchor, |d, a| d * a)?, |ga, da| ga - da)?;
            rhs.axpy(0.5, &remainder)?;
            Some(dg.scaled(0.5))
        };
        let op = self.operator(n, shift)?;
        let (u, report) = solve_from(&op, &rhs, &self.u, opts.linear_tol, opts.linear_cap(&self.mesh))?;
        let stats = StepStats {
            level: n,
            picard_iterations: 1,
            linear_iterations: report.iterations,
            relative_residual: report.relative_residual,
        };
        self.accept(u, stats)?;
        Ok(&self.u)
    }
}

/// SCN level 1: `(1/tau) U^1 - (mu + w[1][1]) Delta_h U^1 = b^1 + g(U^1)/2 + g(U^0)/2 + U^0/tau`.
pub fn scn_first_step<'s>(state: &'s mut SchemeState<'_>, opts: &SolverOptions) -> Result<&'s GridFunction> {
    let n = state.next_level(true)?;
    state.implicit_advance(n, opts).map_err(|e| e.at_level(n))
}

/// SCN level `n >= 2` with the memory sum over the stored history.
pub fn scn_step<'s>(state: &'s mut SchemeState<'_>, opts: &SolverOptions) -> Result<&'s GridFunction> {
    let n = state.next_level(false)?;
    state.implicit_advance(n, opts).map_err(|e| e.at_level(n))
}

/// TTGCN fine level 1, linearized about `anchor` (the coarse auxiliary value).
pub fn fine_first_step<'s>(
    state: &'s mut SchemeState<'_>,
    anchor: &GridFunction,
    opts: &SolverOptions,
) -> Result<&'s GridFunction> {
    let n = state.next_level(true)?;
    state.linearized_advance(n, anchor, opts).map_err(|e| e.at_level(n))
}

/// TTGCN fine level `n >= 2`, linearized about `anchor`.
pub fn fine_step<'s>(
    state: &'s mut SchemeState<'_>,
    anchor: &GridFunction,
    opts: &SolverOptions,
) -> Result<&'s GridFunction> {
    let n = state.next_level(false)?;
    state.linearized_advance(n, anchor, opts).map_err(|e| e.at_level(n))
}

fn march_implicit(mut state: SchemeState<'_>, opts: &SolverOptions) -> Result<Trajectory> {
    scn_first_step(&mut state, opts)?;
    while state.level() < state.steps() {
        scn_step(&mut state, opts)?;
    }
    Ok(state.into_trajectory())
}

/// SCN on the fine time mesh, `tau = tau_F`.
pub fn run_scn(p: &ProblemSpec, cfg: &SchemeConfig) -> Result<Trajectory> {
    cfg.check_against(p)?;
    let state = SchemeState::new(p, cfg.mesh, cfg.pair.t_final(), cfg.pair.fine_steps())?;
    march_implicit(state, &cfg.solver)
}

/// Step I of TTGCN: SCN with step `tau_C`, levels `s = 0..N`.
pub fn coarse_solve(p: &ProblemSpec, cfg: &SchemeConfig) -> Result<Trajectory> {
    cfg.check_against(p)?;
    let window = match cfg.coarse_forcing {
        CoarseForcing::CoarseSlab => ForcingWindow::Slab,
        CoarseForcing::FineSlab => ForcingWindow::TrailingFraction(cfg.pair.ratio()),
    };
    let state = SchemeState::new(p, cfg.mesh, cfg.pair.t_final(), cfg.pair.coarse_steps())?.with_window(window);
    march_implicit(state, &cfg.solver)
}

/// Linear interpolant of the coarse trajectory at fine level `n`.
pub fn interpolate_level(coarse: &Trajectory, k: usize, n: usize) -> Result<GridFunction> {
    if k < 2 {
        return Err(Error::InvalidRatio(k));
    }
    if n > coarse.completed() * k {
        return Err(Error::Index(format!(
            "fine level {n} lies beyond the computed coarse levels ({} x {k})",
            coarse.completed()
        )));
    }
    let (s, q) = (n / k, n % k);
    if q == 0 {
        return Ok(coarse.snapshot(s).clone());
    }
    let theta = q as f64 / k as f64;
    coarse
        .snapshot(s)
        .zip_map(coarse.snapshot(s + 1), |a, b| (1.0 - theta) * a + theta * b)
}

/// Step II of TTGCN: the auxiliary values on every fine level.
pub fn interpolate_coarse(coarse: &Trajectory, k: usize) -> Result<Trajectory> {
    if !coarse.is_complete() {
        return Err(Error::Protocol("coarse trajectory is incomplete".into()));
    }
    let steps = coarse.steps() * k;
    let mut out = Trajectory::start(coarse.t_final(), steps, interpolate_level(coarse, k, 0)?);
    for n in 1..=steps {
        out.snapshots.push(interpolate_level(coarse, k, n)?);
    }
    Ok(out)
}

/// Wall-clock split of a TTGCN run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingBreakdown {
    pub coarse_seconds: f64,
    pub fine_seconds: f64,
}

impl TimingBreakdown {
    pub fn total_seconds(&self) -> f64 {
        self.coarse_seconds + self.fine_seconds
    }
}

#[derive(Debug, Clone)]
pub struct TwoGridRun {
    pub fine: Trajectory,
    pub coarse: Trajectory,
    pub timing: TimingBreakdown,
}

/// All three TTGCN steps: coarse SCN solve, interpolation, linearized fine
/// march.
pub fn run_ttgcn(p: &ProblemSpec, cfg: &SchemeConfig) -> Result<TwoGridRun> {
    cfg.check_against(p)?;
    let k = cfg.pair.ratio();
    let start = Instant::now();
    let coarse = coarse_solve(p, cfg)?;
    let coarse_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let mut state = SchemeState::new(p, cfg.mesh, cfg.pair.t_final(), cfg.pair.fine_steps())?;
    fine_first_step(&mut state, &interpolate_level(&coarse, k, 1)?, &cfg.solver)?;
    while state.level() < state.steps() {
        let anchor = interpolate_level(&coarse, k, state.level() + 1)?;
        fine_step(&mut state, &anchor, &cfg.solver)?;
    }
    let fine_seconds = start.elapsed().as_secs_f64();
    Ok(TwoGridRun {
        fine: state.into_trajectory(),
        coarse,
        timing: TimingBreakdown {
            coarse_seconds,
            fine_seconds,
        },
    })
}
