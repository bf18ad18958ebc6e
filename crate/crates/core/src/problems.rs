//! Problem definitions for
//!
//! ```text
//! u_t - mu Delta u - I^(alpha) Delta u = f(x, y, t) + g(u)   in (0, Lx) x (0, Ly) x (0, T]
//! u = 0 on the boundary,  u(x, y, 0) = psi(x, y)
//! ```
//!
//! and the three benchmark problems on the unit square with `T = 1`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{GridFunction, SpatialMesh};
use crate::quadrature::gamma;

pub type SpaceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Polynomial nonlinearity `g(u) = sum_i c_i u^i` with its exact derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    coeffs: Vec<f64>,
}

impl Nonlinearity {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// `coeffs[i]` multiplies `u^i`.
    pub fn polynomial(coeffs: &[f64]) -> Self {
        let mut coeffs = coeffs.to_vec();
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn value(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, &c)| acc * u + i as f64 * c)
    }

    pub fn apply(&self, u: &GridFunction) -> GridFunction {
        u.map(|v| self.value(v))
    }

    pub fn apply_derivative(&self, u: &GridFunction) -> GridFunction {
        u.map(|v| self.derivative(v))
    }
}

/// The shipped benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemName {
    Example1,
    Example2,
    Example3,
}

impl ProblemName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemName::Example1 => "example1",
            ProblemName::Example2 => "example2",
            ProblemName::Example3 => "example3",
        }
    }

    /// Builds the problem; `mu` overrides the default viscosity of 1.
    pub fn build(&self, alpha: f64, mu: Option<f64>) -> Result<ProblemSpec> {
        let mu = mu.unwrap_or(1.0);
        match self {
            ProblemName::Example1 => example1_with_mu(alpha, mu),
            ProblemName::Example2 => example2_with_mu(alpha, mu),
            ProblemName::Example3 => example3_with_mu(alpha, mu),
        }
    }
}

impl fmt::Display for ProblemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(ProblemName::Example1),
            "example2" => Ok(ProblemName::Example2),
            "example3" => Ok(ProblemName::Example3),
            other => Err(Error::Domain(format!("unknown problem '{other}'"))),
        }
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub alpha: f64,
    pub mu: f64,
    pub t_final: f64,
    pub lx: f64,
    pub ly: f64,
    pub nonlinearity: Nonlinearity,
    /// `None` means `f = 0`.
    pub forcing: Option<SpaceTimeFn>,
    pub initial: SpaceFn,
    pub exact: Option<SpaceTimeFn>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("mu", &self.mu)
            .field("t_final", &self.t_final)
            .field("domain", &(self.lx, self.ly))
            .field("nonlinearity", &self.nonlinearity)
            .field("has_forcing", &self.forcing.is_some())
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemSpec {
    /// Problem on the unit square with `T = 1`, no forcing and no exact
    /// solution; adjust the public fields as needed.
    pub fn new(
        name: impl Into<String>,
        alpha: f64,
        mu: f64,
        nonlinearity: Nonlinearity,
        initial: SpaceFn,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::Domain(format!("mu must be non-negative, got {mu}")));
        }
        Ok(Self {
            name: name.into(),
            alpha,
            mu,
            t_final: 1.0,
            lx: 1.0,
            ly: 1.0,
            nonlinearity,
            forcing: None,
            initial,
            exact: None,
        })
    }

    pub fn with_forcing(mut self, f: SpaceTimeFn) -> Self {
        self.forcing = Some(f);
        self
    }

    pub fn with_exact(mut self, u: SpaceTimeFn) -> Self {
        self.exact = Some(u);
        self
    }

    pub fn g(&self, u: f64) -> f64 {
        self.nonlinearity.value(u)
    }

    pub fn dg(&self, u: f64) -> f64 {
        self.nonlinearity.derivative(u)
    }

    pub fn f(&self, x: f64, y: f64, t: f64) -> f64 {
        self.forcing.as_ref().map_or(0.0, |f| f(x, y, t))
    }

    pub fn psi(&self, x: f64, y: f64) -> f64 {
        (self.initial)(x, y)
    }

    pub fn exact_at(&self, x: f64, y: f64, t: f64) -> Option<f64> {
        self.exact.as_ref().map(|u| u(x, y, t))
    }

    /// `psi` sampled on the interior nodes.
    pub fn initial_grid(&self, mesh: &SpatialMesh) -> GridFunction {
        GridFunction::from_fn(mesh, |x, y| self.psi(x, y))
    }

    /// Exact solution sampled at time `t`, if known.
    pub fn exact_grid(&self, mesh: &SpatialMesh, t: f64) -> Option<GridFunction> {
        self.exact
            .as_ref()
            .map(|u| GridFunction::from_fn(mesh, |x, y| u(x, y, t)))
    }

    pub fn spatial_mesh(&self, mx: usize, my: usize) -> Result<SpatialMesh> {
        SpatialMesh::new(self.lx, self.ly, mx, my)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "kernel exponent alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

fn sin_sin(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

/// `g(u) = -u^2`, `u = (1 + t^(a+1)/Gamma(2+a)) sin(pi x) sin(pi y)`.
pub fn example1(alpha: f64) -> Result<ProblemSpec> {
    example1_with_mu(alpha, 1.0)
}

pub fn example1_with_mu(alpha: f64, mu: f64) -> Result<ProblemSpec> {
    check_alpha(alpha)?;
    let g1a = gamma(1.0 + alpha)?;
    let g2a = gamma(2.0 + alpha)?;
    let g22a = gamma(2.0 + 2.0 * alpha)?;
    let two_pi2 = 2.0 * PI * PI;
    let time = move |t: f64| 1.0 + t.powf(alpha + 1.0) / g2a;
    let exact: SpaceTimeFn = Arc::new(move |x, y, t| time(t) * sin_sin(x, y));
    let forcing: SpaceTimeFn = Arc::new(move |x, y, t| {
        let s = sin_sin(x, y);
        let ta = t.powf(alpha) / g1a;
        let linear = ta
            + two_pi2 * mu * time(t)
            + two_pi2 * (ta + t.powf(2.0 * alpha + 1.0) / g22a);
        let u = time(t) * s;
        linear * s + u * u
    });
    let psi_exact = exact.clone();
    Ok(ProblemSpec::new(
        ProblemName::Example1.as_str(),
        alpha,
        mu,
        Nonlinearity::polynomial(&[0.0, 0.0, -1.0]),
        Arc::new(move |x, y| psi_exact(x, y, 0.0)),
    )?
    .with_forcing(forcing)
    .with_exact(exact))
}

/// `g(u) = -u - u^3`, `u = t^(a+1)/Gamma(2+a) sin(pi x) sin(pi y)`, `psi = 0`.
pub fn example2(alpha: f64) -> Result<ProblemSpec> {
    example2_with_mu(alpha, 1.0)
}

pub fn example2_with_mu(alpha: f64, mu: f64) -> Result<ProblemSpec> {
    check_alpha(alpha)?;
    let g1a = gamma(1.0 + alpha)?;
    let g2a = gamma(2.0 + alpha)?;
    let g22a = gamma(2.0 + 2.0 * alpha)?;
    let two_pi2 = 2.0 * PI * PI;
    let time = move |t: f64| t.powf(alpha + 1.0) / g2a;
    let exact: SpaceTimeFn = Arc::new(move |x, y, t| time(t) * sin_sin(x, y));
    let forcing: SpaceTimeFn = Arc::new(move |x, y, t| {
        let s = sin_sin(x, y);
        let linear = t.powf(alpha) / g1a
            + (two_pi2 * mu + 1.0) * time(t)
            + two_pi2 * t.powf(2.0 * alpha + 1.0) / g22a;
        let u = time(t) * s;
        linear * s + u * u * u
    });
    Ok(ProblemSpec::new(
        ProblemName::Example2.as_str(),
        alpha,
        mu,
        Nonlinearity::polynomial(&[0.0, -1.0, 0.0, -1.0]),
        Arc::new(|_, _| 0.0),
    )?
    .with_forcing(forcing)
    .with_exact(exact))
}

/// `g(u) = -u^3`, `f = 0`, `psi = x y (1 - x)(1 - y)`; no exact solution.
pub fn example3(alpha: f64) -> Result<ProblemSpec> {
    example3_with_mu(alpha, 1.0)
}

pub fn example3_with_mu(alpha: f64, mu: f64) -> Result<ProblemSpec> {
    ProblemSpec::new(
        ProblemName::Example3.as_str(),
        alpha,
        mu,
        Nonlinearity::polynomial(&[0.0, 0.0, 0.0, -1.0]),
        Arc::new(|x, y| x * y * (1.0 - x) * (1.0 - y)),
    )
}

const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664_0,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664_0,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Ratio and depth of the geometric grading used on a slab that starts at
/// `t = 0`, where manufactured forcings carry `t^alpha` factors.
const GRADING_RATIO: f64 = 0.7;
const GRADING_LEVELS: i32 = 64;

/// Five-point Gauss-Legendre integral of `h` over `[a, b]`.
fn gauss_legendre(a: f64, b: f64, h: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    half * GAUSS_WEIGHTS
        .iter()
        .zip(GAUSS_NODES)
        .map(|(w, z)| w * h(mid + half * z))
        .sum::<f64>()
}

/// Slab average `(1 / (t_hi - t_lo)) int_{t_lo}^{t_hi} h(t) dt`.
///
/// Five-point Gauss-Legendre on the whole slab, except when the slab starts
/// at `t = 0`: there the integrand may behave like `t^alpha`, and the slab
/// is split geometrically towards the origin so the singular factor is
/// integrated to rounding level.
pub fn time_average(t_lo: f64, t_hi: f64, h: impl Fn(f64) -> f64) -> f64 {
    if t_lo != 0.0 {
        return gauss_legendre(t_lo, t_hi, h) / (t_hi - t_lo);
    }
    let mut acc = 0.0;
    let mut hi = t_hi;
    for _ in 0..GRADING_LEVELS {
        let lo = GRADING_RATIO * hi;
        acc += gauss_legendre(lo, hi, &h);
        hi = lo;
    }
    acc += gauss_legendre(0.0, hi, &h);
    acc / t_hi
}

/// Slab average `(1 / (t_hi - t_lo)) int_{t_lo}^{t_hi} f(x_i, y_j, t) dt`
/// at every interior node; see [`time_average`] for the rule.
pub fn forcing_slab_average(
    p: &ProblemSpec,
    mesh: &SpatialMesh,
    t_lo: f64,
    t_hi: f64,
) -> Result<GridFunction> {
    if !(t_lo >= 0.0 && t_lo < t_hi && t_hi.is_finite()) {
        return Err(Error::Domain(format!("invalid time slab [{t_lo}, {t_hi}]")));
    }
    let Some(f) = p.forcing.as_ref() else {
        return Ok(GridFunction::zeros(mesh));
    };
    Ok(GridFunction::from_fn(mesh, |x, y| time_average(t_lo, t_hi, |t| f(x, y, t))))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `I^(alpha)[t^beta] = Gamma(beta + 1) / Gamma(beta + 1 + alpha) t^(beta + alpha)`.
    fn rl_integral_of_power(alpha: f64, beta: f64, t: f64) -> f64 {
        gamma(beta + 1.0).unwrap() / gamma(beta + 1.0 + alpha).unwrap() * t.powf(beta + alpha)
    }

    /// Residual of the PDE with every term evaluated analytically for a
    /// solution `u = (c0 + c1 t^(a+1)) sin(pi x) sin(pi y)`.
    fn pde_residual(p: &ProblemSpec, c0: f64, c1: f64, x: f64, y: f64, t: f64) -> f64 {
        let a = p.alpha;
        let s = sin_sin(x, y);
        let u = (c0 + c1 * t.powf(a + 1.0)) * s;
        let u_t = c1 * (a + 1.0) * t.powf(a) * s;
        let lap_u = -2.0 * PI * PI * u;
        let memory = -2.0
            * PI
            * PI
            * s
            * (c0 * rl_integral_of_power(a, 0.0, t) + c1 * rl_integral_of_power(a, a + 1.0, t));
        u_t - p.mu * lap_u - memory - p.f(x, y, t) - p.g(u)
    }

    fn sample_points() -> Vec<(f64, f64, f64)> {
        let mut pts = Vec::new();
        let mut state = 0x2545_f491_u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            pts.push((next(), next(), 1e-3 + next()));
        }
        pts
    }

    #[test]
    fn example1_values() {
        let p = example1(0.5).unwrap();
        let u = p.exact_at(0.5, 0.5, 1.0).unwrap();
        assert!((u - 1.752_252_778_063_675).abs() < 1e-14);
        assert!((p.psi(0.5, 0.5) - 1.0).abs() < 1e-15);
        assert_eq!(p.mu, 1.0);
        assert_eq!(p.g(2.0), -4.0);
        assert_eq!(p.dg(2.0), -4.0);
    }

    #[test]
    fn example1_forcing_is_consistent() {
        for alpha in [0.25, 0.5, 0.75] {
            let p = example1(alpha).unwrap();
            let c1 = 1.0 / gamma(2.0 + alpha).unwrap();
            for (x, y, t) in sample_points() {
                let r = pde_residual(&p, 1.0, c1, x, y, t);
                assert!(r.abs() < 1e-10, "alpha={alpha} residual {r} at ({x},{y},{t})");
            }
        }
    }

    #[test]
    fn example2_values_and_consistency() {
        let p = example2(0.5).unwrap();
        assert!((p.exact_at(0.5, 0.5, 1.0).unwrap() - 0.752_252_778_063_675).abs() < 1e-14);
        assert_eq!(p.dg(0.0), -1.0);
        for alpha in [0.25, 0.5, 0.8] {
            let p = example2(alpha).unwrap();
            for (x, y) in [(0.1, 0.2), (0.5, 0.5), (0.9, 0.33)] {
                assert_eq!(p.psi(x, y), 0.0);
            }
            let c1 = 1.0 / gamma(2.0 + alpha).unwrap();
            for (x, y, t) in sample_points() {
                let r = pde_residual(&p, 0.0, c1, x, y, t);
                assert!(r.abs() < 1e-10, "alpha={alpha} residual {r}");
            }
        }
    }

    #[test]
    fn mu_override_keeps_forcing_consistent() {
        let p = example1_with_mu(0.3, 0.2).unwrap();
        let c1 = 1.0 / gamma(2.3).unwrap();
        for (x, y, t) in sample_points() {
            assert!(pde_residual(&p, 1.0, c1, x, y, t).abs() < 1e-10);
        }
    }

    #[test]
    fn example3_values() {
        let p = example3(0.5).unwrap();
        assert_eq!(p.psi(0.5, 0.5), 0.0625);
        assert!(p.exact.is_none());
        for (x, y, t) in sample_points() {
            assert_eq!(p.f(x, y, t), 0.0);
        }
        for s in [0.0, 0.3, 1.0] {
            assert_eq!(p.psi(0.0, s), 0.0);
            assert_eq!(p.psi(1.0, s), 0.0);
            assert_eq!(p.psi(s, 0.0), 0.0);
            assert_eq!(p.psi(s, 1.0), 0.0);
        }
        assert_eq!(p.g(2.0), -8.0);
    }

    #[test]
    fn alpha_out_of_range() {
        for alpha in [0.0, 1.0, 1.5, -0.2] {
            assert!(matches!(example1(alpha), Err(Error::Domain(_))));
            assert!(matches!(example2(alpha), Err(Error::Domain(_))));
            assert!(matches!(example3(alpha), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn initial_data_matches_exact_at_zero() {
        for p in [example1(0.4).unwrap(), example2(0.6).unwrap()] {
            for (x, y, _) in sample_points() {
                assert!((p.psi(x, y) - p.exact_at(x, y, 0.0).unwrap()).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let eps = 1e-6;
        for p in [example1(0.5).unwrap(), example2(0.5).unwrap(), example3(0.5).unwrap()] {
            let mut lipschitz: f64 = 0.0;
            for i in 0..=40 {
                let v = -2.0 + 0.1 * i as f64;
                let fd = (p.g(v + eps) - p.g(v - eps)) / (2.0 * eps);
                assert!((p.dg(v) - fd).abs() <= 1e-6, "{} at {v}", p.name);
                if i > 0 {
                    let w = v - 0.1;
                    lipschitz = lipschitz.max((p.g(v) - p.g(w)).abs() / 0.1);
                }
            }
            assert!(lipschitz.is_finite() && lipschitz < 20.0);
        }
    }

    #[test]
    fn slab_averages() {
        let mesh = SpatialMesh::unit_square(4).unwrap();
        let base = example3(0.5).unwrap();
        let with = |f: SpaceTimeFn| base.clone().with_forcing(f);

        let b = forcing_slab_average(&with(Arc::new(|_, _, _| 1.0)), &mesh, 0.3, 0.7).unwrap();
        assert!(b.values().iter().all(|v| (v - 1.0).abs() < 1e-15));

        let tau = 1.0 / 64.0;
        let b = forcing_slab_average(&with(Arc::new(|_, _, t| t)), &mesh, 0.0, tau).unwrap();
        assert!(b.values().iter().all(|v| (v - tau / 2.0).abs() < 1e-17));

        let b = forcing_slab_average(&with(Arc::new(|_, _, t| t * t)), &mesh, 1.0, 2.0).unwrap();
        assert!(b.values().iter().all(|v| (v - 7.0 / 3.0).abs() < 1e-14));

        // degree 9 is still integrated exactly
        let b = forcing_slab_average(&with(Arc::new(|_, _, t| t.powi(9))), &mesh, 0.0, 1.0).unwrap();
        assert!(b.values().iter().all(|v| (v - 0.1).abs() < 1e-14));

        let b = forcing_slab_average(&base, &mesh, 0.0, 1.0).unwrap();
        assert_eq!(b, GridFunction::zeros(&mesh));
        assert!(forcing_slab_average(&base, &mesh, -1.0, 1.0).is_err());
        assert!(forcing_slab_average(&base, &mesh, 1.0, 1.0).is_err());
    }

    #[test]
    fn singular_first_slab_is_integrated_accurately() {
        for alpha in [0.1, 0.25, 0.5, 0.8] {
            for tau in [1.0, 1.0 / 8.0, 1.0 / 512.0] {
                let avg = time_average(0.0, tau, |t: f64| t.powf(alpha));
                let exact = tau.powf(alpha) / (alpha + 1.0);
                assert!(((avg - exact) / exact).abs() < 2e-12, "alpha={alpha} tau={tau}");
                let avg = time_average(0.0, tau, |t: f64| 3.0 + t.powf(2.0 * alpha + 1.0));
                let exact = 3.0 + tau.powf(2.0 * alpha + 1.0) / (2.0 * alpha + 2.0);
                assert!(((avg - exact) / exact).abs() < 1e-13);
            }
            // later slabs use the plain five-point rule
            let (a, b) = (0.25_f64, 0.375_f64);
            let exact = (b.powf(alpha + 1.0) - a.powf(alpha + 1.0)) / ((alpha + 1.0) * (b - a));
            assert!(((time_average(a, b, |t: f64| t.powf(alpha)) - exact) / exact).abs() < 1e-8);
        }
    }

    #[test]
    fn names_round_trip() {
        for n in [ProblemName::Example1, ProblemName::Example2, ProblemName::Example3] {
            assert_eq!(n.as_str().parse::<ProblemName>().unwrap(), n);
            assert_eq!(n.build(0.5, None).unwrap().name, n.as_str());
        }
        assert!("example4".parse::<ProblemName>().is_err());
    }
}
