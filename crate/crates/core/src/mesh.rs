//! Uniform space and time meshes, interior grid functions and the discrete
//! inner products and norms built on them.
//!
//! Grid functions store interior nodes only. Array index `[a, b]` holds the
//! value at node `(x_{a+1}, y_{b+1})`; the homogeneous Dirichlet boundary is
//! implicit and never stored.

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::stencil;

/// Uniform rectangular mesh on `(0, Lx) x (0, Ly)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialMesh {
    lx: f64,
    ly: f64,
    mx: usize,
    my: usize,
    h1: f64,
    h2: f64,
}

impl SpatialMesh {
    pub fn new(lx: f64, ly: f64, mx: usize, my: usize) -> Result<Self> {
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::InvalidMesh(format!(
                "domain lengths must be positive and finite, got Lx = {lx}, Ly = {ly}"
            )));
        }
        if mx < 2 || my < 2 {
            return Err(Error::InvalidMesh(format!(
                "need at least two cells per direction, got Mx = {mx}, My = {my}"
            )));
        }
        Ok(Self {
            lx,
            ly,
            mx,
            my,
            h1: lx / mx as f64,
            h2: ly / my as f64,
        })
    }

    /// `M x M` mesh of the unit square.
    pub fn unit_square(m: usize) -> Result<Self> {
        Self::new(1.0, 1.0, m, m)
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn mx(&self) -> usize {
        self.mx
    }

    pub fn my(&self) -> usize {
        self.my
    }

    pub fn h1(&self) -> f64 {
        self.h1
    }

    pub fn h2(&self) -> f64 {
        self.h2
    }

    /// `max(h1, h2)`.
    pub fn h(&self) -> f64 {
        self.h1.max(self.h2)
    }

    /// Shape of the interior array, `(Mx - 1, My - 1)`.
    pub fn interior_shape(&self) -> (usize, usize) {
        (self.mx - 1, self.my - 1)
    }

    pub fn interior_len(&self) -> usize {
        (self.mx - 1) * (self.my - 1)
    }

    /// Node coordinate `x_i` for `0 <= i <= Mx`.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 * self.lx) / self.mx as f64
    }

    /// Node coordinate `y_j` for `0 <= j <= My`.
    pub fn y(&self, j: usize) -> f64 {
        (j as f64 * self.ly) / self.my as f64
    }
}

/// Coupled coarse and fine uniform time meshes on `[0, T]` with
/// `tau_C = k * tau_F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalPair {
    t_final: f64,
    coarse_steps: usize,
    ratio: usize,
}

impl TemporalPair {
    pub fn new(t_final: f64, coarse_steps: usize, ratio: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidMesh(format!(
                "final time must be positive and finite, got {t_final}"
            )));
        }
        if coarse_steps < 1 {
            return Err(Error::InvalidMesh("need at least one coarse step".into()));
        }
        if ratio < 2 {
            return Err(Error::InvalidRatio(ratio));
        }
        Ok(Self {
            t_final,
            coarse_steps,
            ratio,
        })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// `N`.
    pub fn coarse_steps(&self) -> usize {
        self.coarse_steps
    }

    /// `k`.
    pub fn ratio(&self) -> usize {
        self.ratio
    }

    /// `k * N`.
    pub fn fine_steps(&self) -> usize {
        self.coarse_steps * self.ratio
    }

    pub fn tau_coarse(&self) -> f64 {
        self.t_final / self.coarse_steps as f64
    }

    pub fn tau_fine(&self) -> f64 {
        self.t_final / self.fine_steps() as f64
    }

    /// Fine node time `t_n`.
    pub fn fine_time(&self, n: usize) -> f64 {
        node_time(self.t_final, self.fine_steps(), n)
    }

    /// Coarse node time `t_{sk}`; bitwise equal to `fine_time(s * k)`.
    pub fn coarse_time(&self, s: usize) -> f64 {
        node_time(self.t_final, self.coarse_steps, s)
    }

    /// The same pair with both step sizes halved.
    pub fn halved(&self) -> Self {
        Self {
            coarse_steps: 2 * self.coarse_steps,
            ..*self
        }
    }
}

/// `n * T / steps`, formed as a single correctly rounded quotient so that
/// nodes shared by nested meshes agree bitwise.
pub(crate) fn node_time(t_final: f64, steps: usize, n: usize) -> f64 {
    (n as f64 * t_final) / steps as f64
}

/// Values on the interior nodes of a [`SpatialMesh`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    mesh: SpatialMesh,
    values: Array2<f64>,
}

impl GridFunction {
    pub fn zeros(mesh: &SpatialMesh) -> Self {
        Self {
            mesh: *mesh,
            values: Array2::zeros(mesh.interior_shape()),
        }
    }

    pub fn constant(mesh: &SpatialMesh, c: f64) -> Self {
        Self {
            mesh: *mesh,
            values: Array2::from_elem(mesh.interior_shape(), c),
        }
    }

    /// Samples `f(x_i, y_j)` at every interior node.
    pub fn from_fn(mesh: &SpatialMesh, f: impl Fn(f64, f64) -> f64) -> Self {
        let values =
            Array2::from_shape_fn(mesh.interior_shape(), |(a, b)| f(mesh.x(a + 1), mesh.y(b + 1)));
        Self {
            mesh: *mesh,
            values,
        }
    }

    pub fn from_array(mesh: &SpatialMesh, values: Array2<f64>) -> Result<Self> {
        if values.dim() != mesh.interior_shape() {
            return Err(Error::Shape(format!(
                "array of shape {:?} on mesh with interior {:?}",
                values.dim(),
                mesh.interior_shape()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite grid value {bad}")));
        }
        Ok(Self {
            mesh: *mesh,
            values,
        })
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Value at interior node `(i, j)`, `1 <= i <= Mx - 1`, `1 <= j <= My - 1`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[[i - 1, j - 1]]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_same_mesh(&self, other: &GridFunction) -> Result<()> {
        if self.mesh != other.mesh {
            return Err(Error::Shape(format!(
                "grid functions live on different meshes ({}x{} vs {}x{})",
                self.mesh.mx, self.mesh.my, other.mesh.mx, other.mesh.my
            )));
        }
        Ok(())
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &GridFunction) -> Result<()> {
        self.check_same_mesh(x)?;
        Zip::from(&mut self.values)
            .and(&x.values)
            .for_each(|s, &v| *s += a * v);
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        self.values.mapv_inplace(|v| a * v);
    }

    pub fn scaled(&self, a: f64) -> GridFunction {
        GridFunction {
            mesh: self.mesh,
            values: self.values.mapv(|v| a * v),
        }
    }

    /// Pointwise `f(self)`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            mesh: self.mesh,
            values: self.values.mapv(f),
        }
    }

    /// Pointwise `f(self, other)`.
    pub fn zip_map(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        self.check_same_mesh(other)?;
        let mut values = self.values.clone();
        Zip::from(&mut values)
            .and(&other.values)
            .for_each(|s, &o| *s = f(*s, o));
        Ok(GridFunction {
            mesh: self.mesh,
            values,
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_map(other, |a, b| a + b)
    }
}

/// `(u, v) = h1 h2 sum u_ij v_ij` over interior nodes.
pub fn inner_product(u: &GridFunction, v: &GridFunction) -> Result<f64> {
    u.check_same_mesh(v)?;
    let sum = u
        .values
        .iter()
        .zip(v.values.iter())
        .fold(0.0, |acc, (a, b)| acc + a * b);
    Ok(u.mesh.h1 * u.mesh.h2 * sum)
}

/// Discrete L2 norm `sqrt((u, u))`.
pub fn l2_norm(u: &GridFunction) -> f64 {
    let sum = u.values.iter().fold(0.0, |acc, a| acc + a * a);
    (u.mesh.h1 * u.mesh.h2 * sum).sqrt()
}

pub fn max_norm(u: &GridFunction) -> f64 {
    u.values.iter().fold(0.0_f64, |acc, a| acc.max(a.abs()))
}

/// `(||delta_x u||, ||delta_y u||)` over the staggered index ranges, with the
/// boundary differences taken against the implicit zeros.
pub fn gradient_norms(u: &GridFunction) -> (f64, f64) {
    let w = u.mesh.h1 * u.mesh.h2;
    let dx = stencil::forward_diff_x(u);
    let dy = stencil::forward_diff_y(u);
    (
        (w * dx.sum_of_squares()).sqrt(),
        (w * dy.sum_of_squares()).sqrt(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_mesh() {
        let m = SpatialMesh::new(1.0, 1.0, 2, 2).unwrap();
        assert_eq!(m.h1(), 0.5);
        assert_eq!(m.h2(), 0.5);
        assert_eq!(m.interior_shape(), (1, 1));
        assert_eq!((m.x(1), m.y(1)), (0.5, 0.5));
    }

    #[test]
    fn table_meshes() {
        let m = SpatialMesh::unit_square(100).unwrap();
        assert_eq!(m.h1(), 0.01);
        assert_eq!(m.interior_shape(), (99, 99));
        let m = SpatialMesh::unit_square(32).unwrap();
        assert_eq!(m.h(), 1.0 / 32.0);
        assert_eq!(m.interior_len(), 31 * 31);
    }

    #[test]
    fn invalid_meshes() {
        assert!(matches!(
            SpatialMesh::new(0.0, 1.0, 4, 4),
            Err(Error::InvalidMesh(_))
        ));
        assert!(matches!(
            SpatialMesh::new(1.0, -1.0, 4, 4),
            Err(Error::InvalidMesh(_))
        ));
        assert!(matches!(
            SpatialMesh::new(1.0, 1.0, 1, 4),
            Err(Error::InvalidMesh(_))
        ));
    }

    #[test]
    fn temporal_pairs() {
        let p = TemporalPair::new(1.0, 8, 4).unwrap();
        assert_eq!(p.tau_coarse(), 0.125);
        assert_eq!(p.tau_fine(), 1.0 / 32.0);
        assert_eq!(p.fine_steps(), 32);

        let p = TemporalPair::new(1.0, 2, 2).unwrap();
        assert_eq!((p.tau_coarse(), p.tau_fine(), p.fine_steps()), (0.5, 0.25, 4));

        let p = TemporalPair::new(1.0, 16, 5).unwrap();
        assert_eq!(p.tau_coarse(), 1.0 / 16.0);
        assert_eq!(p.tau_fine(), 1.0 / 80.0);
        assert_eq!(p.fine_steps(), 80);

        assert!(matches!(
            TemporalPair::new(1.0, 8, 1),
            Err(Error::InvalidRatio(1))
        ));
        assert!(TemporalPair::new(1.0, 0, 4).is_err());
    }

    #[test]
    fn coarse_nodes_coincide_with_fine_nodes() {
        for n in [1, 2, 3, 7, 12, 16, 96] {
            for k in [2, 3, 4, 5, 7] {
                let p = TemporalPair::new(1.0, n, k).unwrap();
                for s in 0..=n {
                    assert_eq!(
                        p.coarse_time(s).to_bits(),
                        p.fine_time(s * k).to_bits(),
                        "N={n} k={k} s={s}"
                    );
                }
                assert_eq!(p.fine_time(p.fine_steps()), 1.0);
            }
        }
    }

    #[test]
    fn norms_on_smallest_mesh() {
        let m = SpatialMesh::new(1.0, 1.0, 2, 2).unwrap();
        let one = GridFunction::constant(&m, 1.0);
        assert_eq!(inner_product(&one, &one).unwrap(), 0.25);
        assert_eq!(l2_norm(&GridFunction::constant(&m, 3.0)), 1.5);
        assert_eq!(max_norm(&GridFunction::constant(&m, -7.0)), 7.0);
        let zero = GridFunction::zeros(&m);
        assert_eq!(inner_product(&zero, &zero).unwrap(), 0.0);
        assert_eq!(l2_norm(&zero), 0.0);
        assert_eq!(max_norm(&zero), 0.0);

        let (gx, gy) = gradient_norms(&one);
        assert!((gx - 2f64.sqrt()).abs() < 1e-15);
        assert!((gy - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(gradient_norms(&zero), (0.0, 0.0));
    }

    #[test]
    fn mesh_mismatch_is_a_shape_error() {
        let a = GridFunction::zeros(&SpatialMesh::unit_square(4).unwrap());
        let b = GridFunction::zeros(&SpatialMesh::unit_square(8).unwrap());
        assert!(matches!(inner_product(&a, &b), Err(Error::Shape(_))));
        let mut c = a.clone();
        assert!(c.axpy(1.0, &b).is_err());
    }

    #[test]
    fn from_array_validates() {
        let m = SpatialMesh::unit_square(3).unwrap();
        assert!(GridFunction::from_array(&m, Array2::zeros((2, 2))).is_ok());
        assert!(matches!(
            GridFunction::from_array(&m, Array2::zeros((3, 2))),
            Err(Error::Shape(_))
        ));
        let mut bad = Array2::zeros((2, 2));
        bad[[0, 1]] = f64::NAN;
        assert!(GridFunction::from_array(&m, bad).is_err());
    }

    #[test]
    fn max_norm_picks_single_negative_entry() {
        let m = SpatialMesh::unit_square(5).unwrap();
        let mut u = GridFunction::zeros(&m);
        u.values_mut()[[2, 1]] = -7.0;
        assert_eq!(max_norm(&u), 7.0);
        assert_eq!(u.at(3, 2), -7.0);
    }
}
