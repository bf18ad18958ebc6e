//! Matrix-free solver for the per-step systems
//! `(sigma I - c Delta_h - diag(D)) x = r`.
//!
//! The iteration is the conjugate residual method applied to the
//! symmetrically Jacobi-scaled system `S A S y = S r`, `x = S y`, with
//! `S = diag(A)^{-1/2}`. Conjugate residual minimises the (scaled) residual
//! over the Krylov space, so the residual history it reports never grows.
//! Convergence is always confirmed against a residual recomputed from
//! scratch.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{GridFunction, SpatialMesh};
use crate::stencil::{laplacian_slice, apply_laplacian};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Default iteration cap, `10 (Mx - 1)(My - 1)`.
pub fn default_max_iter(mesh: &SpatialMesh) -> usize {
    10 * mesh.interior_len()
}

/// Implicit-side operator `sigma I - c Delta_h - diag(D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOperator {
    sigma: f64,
    c: f64,
    shift: Option<GridFunction>,
}

impl StepOperator {
    pub fn new(sigma: f64, c: f64, shift: Option<GridFunction>) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!(
                "Laplacian coefficient must be non-negative, got {c}"
            )));
        }
        if let Some(d) = &shift {
            if !d.is_finite() {
                return Err(Error::Domain("non-finite diagonal shift".into()));
            }
        }
        Ok(Self { sigma, c, shift })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn shift(&self) -> Option<&GridFunction> {
        self.shift.as_ref()
    }

    /// `min_ij (sigma - D_ij)`; the operator is positive definite when this
    /// is positive.
    pub fn definiteness_margin(&self) -> f64 {
        match &self.shift {
            None => self.sigma,
            Some(d) => d
                .values()
                .iter()
                .fold(f64::INFINITY, |acc, &v| acc.min(self.sigma - v)),
        }
    }

    fn check_definite(&self) -> Result<()> {
        let margin = self.definiteness_margin();
        if !(margin > 0.0) {
            return Err(Error::IndefiniteOperator { min_margin: margin });
        }
        Ok(())
    }

    /// `sigma x - c Delta_h x - D x`.
    pub fn apply(&self, x: &GridFunction) -> Result<GridFunction> {
        if let Some(d) = &self.shift {
            d.check_same_mesh(x)?;
        }
        let lap = apply_laplacian(x);
        let mut out = x.scaled(self.sigma);
        out.axpy(-self.c, &lap)?;
        if let Some(d) = &self.shift {
            out = out.zip_map(&x.zip_map(d, |xv, dv| xv * dv)?, |o, dx| o - dx)?;
        }
        Ok(out)
    }

    /// Diagonal of the operator, `sigma + 2c/h1^2 + 2c/h2^2 - D`.
    pub fn diagonal(&self, mesh: &SpatialMesh) -> Vec<f64> {
        let base = self.sigma
            + 2.0 * self.c / (mesh.h1() * mesh.h1())
            + 2.0 * self.c / (mesh.h2() * mesh.h2());
        match &self.shift {
            None => vec![base; mesh.interior_len()],
            Some(d) => d.values().iter().map(|v| base - v).collect(),
        }
    }

    fn apply_slice(&self, mesh: &SpatialMesh, x: &[f64], lap: &mut [f64], out: &mut [f64]) {
        laplacian_slice(mesh, x, lap);
        match &self.shift {
            None => {
                for ((o, &xv), &l) in out.iter_mut().zip(x).zip(lap.iter()) {
                    *o = self.sigma * xv - self.c * l;
                }
            }
            Some(d) => {
                let d = d.values().as_slice().expect("standard layout");
                for (((o, &xv), &l), &dv) in out.iter_mut().zip(x).zip(lap.iter()).zip(d) {
                    *o = self.sigma * xv - self.c * l - dv * xv;
                }
            }
        }
    }
}

/// Outcome of one linear solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `||b - A x|| / ||b||`, recomputed from the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
    /// Scaled residual norms `||S r_k|| / ||S b||`, one per iteration,
    /// starting with the initial guess.
    #[serde(skip)]
    pub residual_history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `op x = rhs` from a zero initial guess.
pub fn solve(
    op: &StepOperator,
    rhs: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, SolveReport)> {
    solve_from(op, rhs, &GridFunction::zeros(rhs.mesh()), tol, max_iter)
}

/// Solves `op x = rhs` starting from `guess`.
pub fn solve_from(
    op: &StepOperator,
    rhs: &GridFunction,
    guess: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, SolveReport)> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    rhs.check_same_mesh(guess)?;
    if let Some(d) = op.shift() {
        d.check_same_mesh(rhs)?;
    }
    op.check_definite()?;

    let mesh = *rhs.mesh();
    let len = mesh.interior_len();
    let b = rhs.values().as_slice().expect("standard layout");
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((
            GridFunction::zeros(&mesh),
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
                residual_history: vec![0.0],
            },
        ));
    }

    let diag = op.diagonal(&mesh);
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::IndefiniteOperator {
            min_margin: op.definiteness_margin(),
        });
    }
    let scale: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let sb_norm = norm(&b.iter().zip(&scale).map(|(v, s)| v * s).collect::<Vec<_>>());

    let mut x: Vec<f64> = guess.values().iter().copied().collect();
    let mut lap = vec![0.0; len];
    let mut ax = vec![0.0; len];

    // work in the scaled variables: y = x / s, r~ = s r
    let true_residual = |x: &[f64], lap: &mut [f64], ax: &mut [f64]| -> Vec<f64> {
        op.apply_slice(&mesh, x, lap, ax);
        b.iter().zip(ax.iter()).map(|(bv, av)| bv - av).collect()
    };
    let apply_scaled = |v: &[f64], tmp: &mut [f64], lap: &mut [f64], out: &mut [f64]| {
        for ((t, &vv), &s) in tmp.iter_mut().zip(v).zip(&scale) {
            *t = s * vv;
        }
        op.apply_slice(&mesh, tmp, lap, out);
        for (o, &s) in out.iter_mut().zip(&scale) {
            *o *= s;
        }
    };

    let mut y: Vec<f64> = x.iter().zip(&scale).map(|(xv, s)| xv / s).collect();
    let mut r = true_residual(&x, &mut lap, &mut ax);
    let mut rel = norm(&r) / b_norm;
    for (rv, s) in r.iter_mut().zip(&scale) {
        *rv *= s;
    }
    let mut history = vec![norm(&r) / sb_norm];
    let mut iterations = 0;

    let mut tmp = vec![0.0; len];
    let mut ar = vec![0.0; len];
    let mut p = r.clone();
    let mut ap = vec![0.0; len];
    if rel > tol {
        apply_scaled(&r, &mut tmp, &mut lap, &mut ar);
        ap.copy_from_slice(&ar);
    }
    let mut r_ar = dot(&r, &ar);

    while rel > tol {
        if iterations >= max_iter {
            let report = SolveReport {
                iterations,
                relative_residual: rel,
                converged: false,
                residual_history: history,
            };
            return Err(Error::LinearNonConvergence(report));
        }
        iterations += 1;

        let ap_ap = dot(&ap, &ap);
        if !(ap_ap > 0.0) || !(r_ar > 0.0) {
            break;
        }
        let step = r_ar / ap_ap;
        for ((yv, rv), (&pv, &apv)) in y.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
            *yv += step * pv;
            *rv -= step * apv;
        }
        history.push(norm(&r) / sb_norm);

        // recursive residual in unscaled form
        let recursive_rel = r
            .iter()
            .zip(&scale)
            .fold(0.0, |acc, (rv, s)| acc + (rv / s) * (rv / s))
            .sqrt()
            / b_norm;
        if recursive_rel <= tol {
            for ((xv, &yv), &s) in x.iter_mut().zip(&y).zip(&scale) {
                *xv = s * yv;
            }
            let fresh = true_residual(&x, &mut lap, &mut ax);
            rel = norm(&fresh) / b_norm;
            if rel <= tol {
                break;
            }
            // residual replacement: restart the recurrences from the true residual
            for ((rv, &fv), &s) in r.iter_mut().zip(&fresh).zip(&scale) {
                *rv = s * fv;
            }
            p.copy_from_slice(&r);
            apply_scaled(&r, &mut tmp, &mut lap, &mut ar);
            ap.copy_from_slice(&ar);
            r_ar = dot(&r, &ar);
            continue;
        }

        apply_scaled(&r, &mut tmp, &mut lap, &mut ar);
        let r_ar_new = dot(&r, &ar);
        let beta = r_ar_new / r_ar;
        r_ar = r_ar_new;
        for (((pv, apv), &rv), &arv) in p.iter_mut().zip(ap.iter_mut()).zip(&r).zip(&ar) {
            *pv = rv + beta * *pv;
            *apv = arv + beta * *apv;
        }
    }

    for ((xv, &yv), &s) in x.iter_mut().zip(&y).zip(&scale) {
        *xv = s * yv;
    }
    let fresh = true_residual(&x, &mut lap, &mut ax);
    rel = norm(&fresh) / b_norm;
    let report = SolveReport {
        iterations,
        relative_residual: rel,
        converged: rel <= tol,
        residual_history: history,
    };
    if !report.converged {
        return Err(Error::LinearNonConvergence(report));
    }
    let values = ndarray::Array2::from_shape_vec(mesh.interior_shape(), x).expect("shape");
    Ok((GridFunction::from_array(&mesh, values)?, report))
}
