//! Central-difference operators on interior grid functions with zero
//! Dirichlet boundary. Everything is applied matrix-free.

use ndarray::{Array2, Axis};

use crate::mesh::{GridFunction, SpatialMesh};

/// Which staggered family a [`StaggeredField`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaggerAxis {
    /// `delta_x z_{i+1/2, j}`, `0 <= i <= Mx - 1`, `1 <= j <= My - 1`.
    X,
    /// `delta_y z_{i, j+1/2}`, `1 <= i <= Mx - 1`, `0 <= j <= My - 1`.
    Y,
}

/// First differences living on cell edges.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredField {
    pub axis: StaggerAxis,
    /// Shape `(Mx, My - 1)` for [`StaggerAxis::X`], `(Mx - 1, My)` for `Y`.
    pub values: Array2<f64>,
}

impl StaggeredField {
    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc + v * v)
    }

    /// Unweighted `sum a * b` over matching staggered nodes.
    pub fn dot(&self, other: &StaggeredField) -> f64 {
        assert_eq!(self.axis, other.axis);
        assert_eq!(self.values.dim(), other.values.dim());
        self.values
            .iter()
            .zip(other.values.iter())
            .fold(0.0, |acc, (a, b)| acc + a * b)
    }
}

pub fn forward_diff_x(u: &GridFunction) -> StaggeredField {
    let mesh = u.mesh();
    let (nx, ny) = mesh.interior_shape();
    let inv_h = 1.0 / mesh.h1();
    let v = u.values();
    let values = Array2::from_shape_fn((nx + 1, ny), |(i, b)| {
        let right = if i < nx { v[[i, b]] } else { 0.0 };
        let left = if i > 0 { v[[i - 1, b]] } else { 0.0 };
        (right - left) * inv_h
    });
    StaggeredField {
        axis: StaggerAxis::X,
        values,
    }
}

pub fn forward_diff_y(u: &GridFunction) -> StaggeredField {
    let mesh = u.mesh();
    let (nx, ny) = mesh.interior_shape();
    let inv_h = 1.0 / mesh.h2();
    let v = u.values();
    let values = Array2::from_shape_fn((nx, ny + 1), |(a, j)| {
        let up = if j < ny { v[[a, j]] } else { 0.0 };
        let down = if j > 0 { v[[a, j - 1]] } else { 0.0 };
        (up - down) * inv_h
    });
    StaggeredField {
        axis: StaggerAxis::Y,
        values,
    }
}

/// `delta_x^2 u` as the difference of two staggered first differences.
pub fn second_diff_x(u: &GridFunction) -> GridFunction {
    let d = forward_diff_x(u);
    let inv_h = 1.0 / u.mesh().h1();
    let values = &d.values.slice_axis(Axis(0), (1..).into()) - &d.values.slice_axis(Axis(0), (..-1).into());
    GridFunction::from_array(u.mesh(), values.mapv(|v| v * inv_h)).expect("shape preserved")
}

/// `delta_y^2 u` as the difference of two staggered first differences.
pub fn second_diff_y(u: &GridFunction) -> GridFunction {
    let d = forward_diff_y(u);
    let inv_h = 1.0 / u.mesh().h2();
    let values = &d.values.slice_axis(Axis(1), (1..).into()) - &d.values.slice_axis(Axis(1), (..-1).into());
    GridFunction::from_array(u.mesh(), values.mapv(|v| v * inv_h)).expect("shape preserved")
}

/// Five-point discrete Laplacian `Delta_h u`.
pub fn apply_laplacian(u: &GridFunction) -> GridFunction {
    let mut out = GridFunction::zeros(u.mesh());
    laplacian_into(u, &mut out);
    out
}

/// Writes `Delta_h u` into `out`, which must live on the same mesh.
pub fn laplacian_into(u: &GridFunction, out: &mut GridFunction) {
    assert_eq!(u.mesh(), out.mesh(), "laplacian_into: mesh mismatch");
    let mesh = *u.mesh();
    let src = u.values().as_slice().expect("standard layout");
    let dst = out.values_mut().as_slice_mut().expect("standard layout");
    laplacian_slice(&mesh, src, dst);
}

/// Five-point Laplacian on row-major interior slices of length
/// `(Mx - 1) * (My - 1)`.
pub(crate) fn laplacian_slice(mesh: &SpatialMesh, src: &[f64], dst: &mut [f64]) {
    let (nx, ny) = mesh.interior_shape();
    debug_assert_eq!(src.len(), nx * ny);
    debug_assert_eq!(dst.len(), nx * ny);
    let cx = 1.0 / (mesh.h1() * mesh.h1());
    let cy = 1.0 / (mesh.h2() * mesh.h2());
    for a in 0..nx {
        let row = a * ny;
        for b in 0..ny {
            let k = row + b;
            let c = src[k];
            let west = if a > 0 { src[k - ny] } else { 0.0 };
            let east = if a + 1 < nx { src[k + ny] } else { 0.0 };
            let south = if b > 0 { src[k - 1] } else { 0.0 };
            let north = if b + 1 < ny { src[k + 1] } else { 0.0 };
            dst[k] = (west - 2.0 * c + east) * cx + (south - 2.0 * c + north) * cy;
        }
    }
}
