//! Product-integration weights for the Riemann-Liouville memory term and
//! the discrete time-averaging operators built on them.
//!
//! With `rho(t) = t^(alpha-1) / Gamma(alpha)`, the weight
//!
//! ```text
//! w[n][m] = (1/tau) * int_{t_{n-1}}^{t_n} int_{t_{m-1}}^{min(t, t_m)} rho(t - s) ds dt
//! ```
//!
//! has a closed form: `tau^alpha / Gamma(2 + alpha)` on the diagonal and a
//! second difference of `t^(alpha+1)` below it.

use crate::error::{Error, Result};
use crate::mesh::GridFunction;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for positive arguments.
///
/// Lanczos approximation (g = 7, nine terms) on `[1/2, inf)`, shifted down
/// with `Gamma(x) = Gamma(x + 1) / x` below that. Positive integers up to
/// 21 return the exact factorial.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma needs a positive finite argument, got {x}")));
    }
    if x.fract() == 0.0 && x <= 21.0 {
        return Ok((1..x as u64).fold(1.0, |acc, k| acc * k as f64));
    }
    if x < 0.5 {
        return Ok(lanczos(x + 1.0) / x);
    }
    Ok(lanczos(x))
}

fn lanczos(x: f64) -> f64 {
    let z = x - 1.0;
    let mut series = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        series += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    // split the power so t^(z + 1/2) does not overflow before exp(-t) applies
    let half = t.powf(0.5 * (z + 0.5));
    (2.0 * std::f64::consts::PI).sqrt() * half * (-t).exp() * half * series
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("kernel exponent alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("time step must be positive and finite, got {tau}")));
    }
    Ok(())
}

/// `w` at lag `j = n - m`, given `Gamma(2 + alpha)`.
fn weight_at_lag(lag: usize, tau: f64, alpha: f64, gamma_2a: f64) -> f64 {
    let p = alpha + 1.0;
    if lag == 0 {
        return tau.powf(alpha) / gamma_2a;
    }
    let a = (lag + 1) as f64 * tau;
    let b = lag as f64 * tau;
    let c = (lag - 1) as f64 * tau;
    let (ap, bp, cp) = (a.powf(p), b.powf(p), c.powf(p));
    ((ap - bp) - (bp - cp)) / (tau * gamma_2a)
}

/// Single product-integration weight `w[n][m]`, `1 <= m <= n`.
pub fn weight(n: usize, m: usize, tau: f64, alpha: f64) -> Result<f64> {
    if m < 1 || m > n {
        return Err(Error::Index(format!("weight index m = {m} outside 1..={n}")));
    }
    check_tau(tau)?;
    check_alpha(alpha)?;
    Ok(weight_at_lag(n - m, tau, alpha, gamma(2.0 + alpha)?))
}

/// The weights `w[n][1..=n]` of one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRow {
    level: usize,
    alpha: f64,
    tau: f64,
    weights: Vec<f64>,
}

impl WeightRow {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `weights()[m - 1] == w[n][m]`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `w[n][m]` with 1-based `m`.
    pub fn get(&self, m: usize) -> f64 {
        self.weights[m - 1]
    }

    /// The diagonal weight `w[n][n]`.
    pub fn diagonal(&self) -> f64 {
        self.weights[self.level - 1]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub fn weight_row(n: usize, tau: f64, alpha: f64) -> Result<WeightRow> {
    if n < 1 {
        return Err(Error::Index("weight rows start at level 1".into()));
    }
    check_tau(tau)?;
    check_alpha(alpha)?;
    let g = gamma(2.0 + alpha)?;
    let weights = (1..=n).map(|m| weight_at_lag(n - m, tau, alpha, g)).collect();
    Ok(WeightRow {
        level: n,
        alpha,
        tau,
        weights,
    })
}

/// Weights indexed by lag, `lags[j] = w[n][n - j]` for `0 <= j < len`; the
/// rule is translation invariant, so one table serves every level.
pub fn lag_weights(len: usize, tau: f64, alpha: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    check_alpha(alpha)?;
    let g = gamma(2.0 + alpha)?;
    Ok((0..len).map(|j| weight_at_lag(j, tau, alpha, g)).collect())
}

/// Closed-form row sum `(t_n^(a+1) - t_{n-1}^(a+1)) / (tau Gamma(2 + a))`.
pub fn row_sum_exact(n: usize, tau: f64, alpha: f64) -> Result<f64> {
    let p = alpha + 1.0;
    let hi = (n as f64 * tau).powf(p);
    let lo = ((n - 1) as f64 * tau).powf(p);
    Ok((hi - lo) / (tau * gamma(2.0 + alpha)?))
}

/// Stored arguments of the memory operator: entry 1 is `Delta_h U^1`,
/// entry `m >= 2` is `Delta_h U^{m-1/2}`.
#[derive(Debug, Clone, Default)]
pub struct HalfStepHistory {
    entries: Vec<GridFunction>,
}

impl HalfStepHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            entries: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, entry: GridFunction) -> Result<()> {
        if let Some(first) = self.entries.first() {
            first.check_same_mesh(&entry)?;
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry `m` (1-based).
    pub fn get(&self, m: usize) -> &GridFunction {
        &self.entries[m - 1]
    }

    /// `sum_m weights[m - 1] * entry_m` over the first `weights.len()`
    /// entries, accumulated in increasing `m`.
    pub fn weighted_sum(&self, weights: &[f64]) -> Result<GridFunction> {
        if weights.len() > self.entries.len() {
            return Err(Error::History {
                expected: weights.len(),
                found: self.entries.len(),
            });
        }
        let first = self
            .entries
            .first()
            .ok_or(Error::History { expected: weights.len(), found: 0 })?;
        let mut acc = GridFunction::zeros(first.mesh());
        for (w, entry) in weights.iter().zip(&self.entries) {
            acc.axpy(*w, entry)?;
        }
        Ok(acc)
    }
}

/// Memory operator at level `n`:
/// `w[n][1] Delta_h U^1 + sum_{m=2}^{n} w[n][m] Delta_h U^{m-1/2}`.
pub fn memory_term(row: &WeightRow, history: &HalfStepHistory) -> Result<GridFunction> {
    if history.len() != row.level() {
        return Err(Error::History {
            expected: row.level(),
            found: history.len(),
        });
    }
    history.weighted_sum(row.weights())
}

/// Time-averaging operator: `U^1` at level 1, `(U^n + U^{n-1}) / 2` after.
pub fn time_average_l1(
    n: usize,
    u1: &GridFunction,
    un: &GridFunction,
    unm1: &GridFunction,
) -> Result<GridFunction> {
    match n {
        0 => Err(Error::Index("time levels start at 1".into())),
        1 => Ok(u1.clone()),
        _ => un.zip_map(unm1, |a, b| 0.5 * (a + b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SpatialMesh;

    // Reference values below come from arbitrary-precision evaluation of the
    // defining double integral.
    const W_1_1_HALF: f64 = 0.752_252_778_063_675_049_26;
    const W_2_1_HALF: f64 = 0.623_186_606_013_624_183_82;
    const W_3_1_HALF: f64 = 0.405_688_549_005_085_857_26;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma(1.0).unwrap(), 1.0);
        assert_eq!(gamma(5.0).unwrap(), 24.0);
        assert!(rel(gamma(0.5).unwrap(), 1.772_453_850_905_516_0) < 1e-14);
        assert!(rel(gamma(2.5).unwrap(), 1.329_340_388_179_137_0) < 1e-14);
        assert!(rel(gamma(0.1).unwrap(), 9.513_507_698_668_731_3) < 1e-13);
        assert!(rel(gamma(7.3).unwrap(), 1_271.423_633_663_908_8) < 1e-13);
    }

    #[test]
    fn gamma_rejects_non_positive() {
        for x in [0.0, -1.0, -0.5, f64::NAN, f64::INFINITY] {
            assert!(matches!(gamma(x), Err(Error::Domain(_))), "x = {x}");
        }
    }

    #[test]
    fn gamma_recurrence() {
        for i in 1..200 {
            let x = 0.05 * i as f64;
            let lhs = gamma(x + 1.0).unwrap();
            let rhs = x * gamma(x).unwrap();
            assert!(rel(lhs, rhs) < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn known_weights() {
        assert!(rel(weight(1, 1, 1.0, 0.5).unwrap(), W_1_1_HALF) < 1e-14);
        assert!(rel(weight(2, 1, 1.0, 0.5).unwrap(), W_2_1_HALF) < 1e-14);
        assert!(rel(weight(2, 2, 1.0, 0.5).unwrap(), W_1_1_HALF) < 1e-14);
        assert!(rel(weight(3, 1, 1.0, 0.5).unwrap(), W_3_1_HALF) < 1e-14);
        assert!(rel(weight(6, 2, 0.125, 0.25).unwrap(), 0.058_388_254_535_604_162) < 1e-13);
        assert!(rel(weight(8, 5, 0.125, 0.75).unwrap(), 0.130_740_081_606_991_25) < 1e-13);
    }

    #[test]
    fn weight_argument_errors() {
        assert!(matches!(weight(3, 4, 1.0, 0.5), Err(Error::Index(_))));
        assert!(matches!(weight(3, 0, 1.0, 0.5), Err(Error::Index(_))));
        assert!(matches!(weight(3, 1, 1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(weight(3, 1, 1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(weight(3, 1, 0.0, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn rows() {
        let r = weight_row(1, 1.0, 0.5).unwrap();
        assert_eq!(r.weights().len(), 1);
        assert!(rel(r.get(1), W_1_1_HALF) < 1e-14);

        let r = weight_row(2, 1.0, 0.5).unwrap();
        assert!(rel(r.get(1), W_2_1_HALF) < 1e-14);
        assert!(rel(r.diagonal(), W_1_1_HALF) < 1e-14);
        assert!(rel(r.sum(), 1.375_439_384_077_299_233_1) < 1e-14);
    }

    #[test]
    fn row_sums_and_positivity() {
        for &alpha in &[0.1, 0.25, 0.5, 0.75, 0.9] {
            for &tau in &[1.0, 1.0 / 64.0] {
                for n in 1..=200 {
                    let r = weight_row(n, tau, alpha).unwrap();
                    assert!(r.weights().iter().all(|&w| w > 0.0), "n={n} alpha={alpha}");
                    let exact = row_sum_exact(n, tau, alpha).unwrap();
                    assert!(rel(r.sum(), exact) <= 1e-12, "n={n} alpha={alpha} tau={tau}");
                    assert!(rel(r.diagonal(), tau.powf(alpha) / gamma(2.0 + alpha).unwrap()) < 1e-15);
                }
            }
        }
    }

    #[test]
    fn memory_term_cases() {
        let mesh = SpatialMesh::unit_square(4).unwrap();
        let zero = GridFunction::zeros(&mesh);
        let mut h = HalfStepHistory::new();
        h.push(zero.clone()).unwrap();
        let row = weight_row(1, 1.0, 0.5).unwrap();
        assert_eq!(memory_term(&row, &h).unwrap(), zero);

        let z = GridFunction::from_fn(&mesh, |x, y| x - 2.0 * y);
        let mut h = HalfStepHistory::new();
        h.push(z.clone()).unwrap();
        let out = memory_term(&row, &h).unwrap();
        for (o, v) in out.values().iter().zip(z.values().iter()) {
            assert!((o - W_1_1_HALF * v).abs() < 1e-15);
        }

        let cs = [1.5, -2.0, 0.25];
        let mut h = HalfStepHistory::new();
        for c in cs {
            h.push(GridFunction::constant(&mesh, c)).unwrap();
        }
        let row = weight_row(3, 1.0, 0.5).unwrap();
        let expected = W_3_1_HALF * cs[0] + W_2_1_HALF * cs[1] + W_1_1_HALF * cs[2];
        let out = memory_term(&row, &h).unwrap();
        assert!(out.values().iter().all(|v| (v - expected).abs() < 1e-14));
    }

    #[test]
    fn memory_term_length_mismatch() {
        let mesh = SpatialMesh::unit_square(4).unwrap();
        let mut h = HalfStepHistory::new();
        h.push(GridFunction::zeros(&mesh)).unwrap();
        let row = weight_row(2, 1.0, 0.5).unwrap();
        assert!(matches!(
            memory_term(&row, &h),
            Err(Error::History { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn averaging_operator() {
        let mesh = SpatialMesh::unit_square(4).unwrap();
        let z = GridFunction::from_fn(&mesh, |x, y| x * y + 1.0);
        let neg = z.scaled(-1.0);
        assert_eq!(time_average_l1(1, &z, &neg, &neg).unwrap(), z);
        assert!(time_average_l1(2, &z, &z, &neg)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        let three = GridFunction::constant(&mesh, 3.0);
        let one = GridFunction::constant(&mesh, 1.0);
        assert_eq!(
            time_average_l1(5, &z, &three, &one).unwrap(),
            GridFunction::constant(&mesh, 2.0)
        );
    }
}
