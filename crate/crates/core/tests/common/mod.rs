#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

use ttgcn::mesh::inner_product;
use ttgcn::stencil::{forward_diff_x, forward_diff_y};
use ttgcn::{GridFunction, SpatialMesh};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(mesh: &SpatialMesh, rng: &mut ChaCha8Rng) -> GridFunction {
    let values = ndarray::Array2::from_shape_fn(mesh.interior_shape(), |_| rng.random_range(-1.0..1.0));
    GridFunction::from_array(mesh, values).unwrap()
}

pub fn random_sequence(mesh: &SpatialMesh, len: usize, rng: &mut ChaCha8Rng) -> Vec<GridFunction> {
    (0..len).map(|_| random_grid(mesh, rng)).collect()
}

// Kronrod 15-point nodes and weights on [-1, 1], with the embedded
// 7-point Gauss weights for the error estimate.
const XK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let (l, r) = (f(c - h * XK[i]), f(c + h * XK[i]));
        k += WK[i] * (l + r);
        if i % 2 == 1 {
            g += WG[i / 2] * (l + r);
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive bisection Gauss-Kronrod to an absolute tolerance.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    rec(f, a, b, tol, 50)
}

/// `(1/tau) int_{t_{n-1}}^{t_n} int_{t_{m-1}}^{min(t, t_m)} (t-s)^(a-1)/Gamma(a) ds dt`,
/// with the inner integral in closed form.
pub fn weight_oracle(n: usize, m: usize, tau: f64, alpha: f64) -> f64 {
    let ga1 = gamma(alpha + 1.0);
    let (lo, hi) = ((m - 1) as f64 * tau, m as f64 * tau);
    let inner = |t: f64| {
        let top = t.min(hi);
        if top <= lo {
            0.0
        } else {
            ((t - lo).powf(alpha) - (t - top).powf(alpha)) / ga1
        }
    };
    integrate(&inner, (n - 1) as f64 * tau, n as f64 * tau, 1e-14 * tau) / tau
}

/// `(grad a, grad b)` with the gradient as the staggered pair.
pub fn grad_inner(a: &GridFunction, b: &GridFunction) -> f64 {
    let mesh = a.mesh();
    let area = mesh.h1() * mesh.h2();
    area * (forward_diff_x(a).dot(&forward_diff_x(b)) + forward_diff_y(a).dot(&forward_diff_y(b)))
}

/// `phi_1 = v^1`, `phi_m = v^{m-1/2}` for `m >= 2`.
fn memory_arguments(v: &[GridFunction]) -> Vec<GridFunction> {
    (1..v.len())
        .map(|m| {
            if m == 1 {
                v[1].clone()
            } else {
                v[m].add(&v[m - 1]).unwrap().scaled(0.5)
            }
        })
        .collect()
}

/// Full memory form `sum_n (grad phi_n, L2^n(grad v))` for `v^0..v^N`,
/// returned with the magnitude scale `sum_n sum_m |w_nm| |grad phi_n| |grad phi_m|`.
pub fn memory_form(v: &[GridFunction], tau: f64, alpha: f64) -> (f64, f64) {
    let phi = memory_arguments(v);
    let len = phi.len();
    let lags = ttgcn::quadrature::lag_weights(len, tau, alpha).unwrap();
    let norms: Vec<f64> = phi.iter().map(|p| grad_inner(p, p).sqrt()).collect();
    let (mut sum, mut scale) = (0.0, 0.0);
    for n in 0..len {
        for m in 0..=n {
            let w = lags[n - m];
            sum += w * grad_inner(&phi[n], &phi[m]);
            scale += w.abs() * norms[n] * norms[m];
        }
    }
    (sum, scale)
}

/// Left and right sides of the telescoping inequality.
pub fn telescoping_sides(v: &[GridFunction], tau: f64) -> (f64, f64) {
    let phi = memory_arguments(v);
    let mut lhs = 0.0;
    for n in 1..v.len() {
        let dt = v[n].sub(&v[n - 1]).unwrap().scaled(1.0 / tau);
        lhs += tau * inner_product(&phi[n - 1], &dt).unwrap();
    }
    let last = v.last().unwrap();
    let rhs = 0.5 * (inner_product(last, last).unwrap() - inner_product(&v[0], &v[0]).unwrap());
    (lhs, rhs)
}

/// Gap of summation by parts in x and y for one pair, relative to the
/// Cauchy-Schwarz bound `|delta v| |delta w|`.
pub fn summation_by_parts_gaps(v: &GridFunction, w: &GridFunction) -> (f64, f64) {
    let mesh = v.mesh();
    let area = mesh.h1() * mesh.h2();
    let (dvx, dwx) = (forward_diff_x(v), forward_diff_x(w));
    let (dvy, dwy) = (forward_diff_y(v), forward_diff_y(w));
    let x_lhs = -inner_product(&ttgcn::stencil::second_diff_x(v), w).unwrap();
    let y_lhs = -inner_product(&ttgcn::stencil::second_diff_y(v), w).unwrap();
    let x_scale = area * (dvx.sum_of_squares() * dwx.sum_of_squares()).sqrt();
    let y_scale = area * (dvy.sum_of_squares() * dwy.sum_of_squares()).sqrt();
    (
        (x_lhs - area * dvx.dot(&dwx)).abs() / x_scale,
        (y_lhs - area * dvy.dot(&dwy)).abs() / y_scale,
    )
}
