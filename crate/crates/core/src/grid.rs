//! Periodic base grid, scalar fields over it, and differentiation in the
//! z-gauge and the arclength gauge.
//!
//! The grid is fixed in z; the arclength gauge `ds = phi dz` is realised
//! through the chain rule `d/ds = (1/phi) d/dz` and never by remeshing.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};

/// Accuracy of the central finite-difference stencil used for `d/dz`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StencilOrder {
    /// 3-point stencil, error O(dz^2).
    Second,
    /// 5-point stencil, error O(dz^4).
    #[default]
    Fourth,
}

impl StencilOrder {
    pub fn order(self) -> i32 {
        match self {
            StencilOrder::Second => 2,
            StencilOrder::Fourth => 4,
        }
    }
}

/// Uniform grid on the circle `[0, 2pi)` with `n` points, `z_k = k dz`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    n: usize,
    order: StencilOrder,
}

impl PeriodicGrid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(n: usize) -> Result<Self> {
        Self::with_order(n, StencilOrder::Fourth)
    }

    pub fn with_order(n: usize, order: StencilOrder) -> Result<Self> {
        if n < Self::MIN_POINTS {
            return Err(FlowError::InvalidGrid(format!(
                "need at least {} points, got {n}",
                Self::MIN_POINTS
            )));
        }
        if n % 2 != 0 {
            return Err(FlowError::InvalidGrid(format!(
                "point count must be even, got {n}"
            )));
        }
        Ok(Self { n, order })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> StencilOrder {
        self.order
    }

    pub fn dz(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn z(&self, k: usize) -> f64 {
        k as f64 * self.dz()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.z(k))
    }
}

/// Real values sampled on a [`PeriodicGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl ScalarField {
    /// Wraps `values`, rejecting a length mismatch or any non-finite entry.
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(FlowError::GridMismatch {
                expected: grid.n(),
                found: values.len(),
            });
        }
        check_finite("field", &values)?;
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: PeriodicGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().map(f).collect())
    }

    pub fn constant(grid: PeriodicGrid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.n()])
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self::from_vec_unchecked(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| f(x, y))
                .collect(),
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Max-norm distance to `other`.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())))
    }

    fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.n() != other.grid.n() {
            return Err(FlowError::GridMismatch {
                expected: self.grid.n(),
                found: other.grid.n(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for ScalarField {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

/// The complete flow state: gauge factor `phi` and fiber radii `a, b, c`
/// at time `t`, all on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricState {
    pub t: f64,
    phi: ScalarField,
    a: ScalarField,
    b: ScalarField,
    c: ScalarField,
}

impl MetricState {
    /// Builds a state, checking the shared grid and pointwise positivity.
    pub fn new(
        t: f64,
        phi: ScalarField,
        a: ScalarField,
        b: ScalarField,
        c: ScalarField,
    ) -> Result<Self> {
        let n = phi.grid().n();
        for f in [&a, &b, &c] {
            if f.grid().n() != n {
                return Err(FlowError::GridMismatch {
                    expected: n,
                    found: f.grid().n(),
                });
            }
        }
        check_positive_phi(phi.values())?;
        for (name, f) in [("a", &a), ("b", &b), ("c", &c)] {
            if let Some((k, &v)) = f.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
                return Err(FlowError::DegenerateFiber {
                    field: name,
                    index: k,
                    value: v,
                });
            }
        }
        Ok(Self { t, phi, a, b, c })
    }

    /// Evaluates four profile functions of `z` on `grid` at `t = 0`.
    pub fn from_profiles(
        grid: PeriodicGrid,
        phi: impl Fn(f64) -> f64,
        a: impl Fn(f64) -> f64,
        b: impl Fn(f64) -> f64,
        c: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        Self::new(
            0.0,
            ScalarField::from_fn(grid, phi)?,
            ScalarField::from_fn(grid, a)?,
            ScalarField::from_fn(grid, b)?,
            ScalarField::from_fn(grid, c)?,
        )
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.phi.grid()
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn a(&self) -> &ScalarField {
        &self.a
    }

    pub fn b(&self) -> &ScalarField {
        &self.b
    }

    pub fn c(&self) -> &ScalarField {
        &self.c
    }

    /// Smallest of `b - a` and `c - b` over the grid, with its index.
    pub fn ordering_margin(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for k in 0..self.grid().n() {
            let m = (self.b[k] - self.a[k]).min(self.c[k] - self.b[k]);
            if m < best.0 {
                best = (m, k);
            }
        }
        best
    }

    /// True when `a <= b <= c` holds at every grid point.
    pub fn is_ordered(&self) -> bool {
        self.ordering_margin().0 >= 0.0
    }
}

pub(crate) fn check_finite(field: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(FlowError::NonFinite { field, index }),
        None => Ok(()),
    }
}

pub(crate) fn check_positive_phi(phi: &[f64]) -> Result<()> {
    match phi.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        Some((index, &value)) => Err(FlowError::GaugeDegenerate { index, value }),
        None => Ok(()),
    }
}

/// Periodic central difference of `f` into `out`; no validation.
pub(crate) fn diff_periodic(f: &[f64], dz: f64, order: StencilOrder, out: &mut [f64]) {
    let n = f.len();
    match order {
        StencilOrder::Second => {
            let inv = 1.0 / (2.0 * dz);
            for k in 0..n {
                let kp = if k + 1 == n { 0 } else { k + 1 };
                let km = if k == 0 { n - 1 } else { k - 1 };
                out[k] = (f[kp] - f[km]) * inv;
            }
        }
        StencilOrder::Fourth => {
            let inv = 1.0 / (12.0 * dz);
            for k in 0..n {
                let kp1 = (k + 1) % n;
                let kp2 = (k + 2) % n;
                let km1 = (k + n - 1) % n;
                let km2 = (k + n - 2) % n;
                // differences first, so constants map to exactly zero
                out[k] = (8.0 * (f[kp1] - f[km1]) - (f[kp2] - f[km2])) * inv;
            }
        }
    }
}

pub(crate) fn dz_vec(f: &[f64], grid: PeriodicGrid) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    diff_periodic(f, grid.dz(), grid.order(), &mut out);
    out
}

/// Arclength derivative `f' = (df/dz) / phi` without validation.
pub(crate) fn ds_vec(f: &[f64], phi: &[f64], grid: PeriodicGrid) -> Vec<f64> {
    let mut out = dz_vec(f, grid);
    for (o, p) in out.iter_mut().zip(phi) {
        *o /= p;
    }
    out
}

/// Periodic central-difference derivative `df/dz`.
pub fn d_z(f: &ScalarField) -> Result<ScalarField> {
    check_finite("f", f.values())?;
    Ok(ScalarField::from_vec_unchecked(
        f.grid(),
        dz_vec(f.values(), f.grid()),
    ))
}

/// Arclength derivative `f' = (1/phi) df/dz`.
pub fn s_derivative(f: &ScalarField, phi: &ScalarField) -> Result<ScalarField> {
    check_finite("f", f.values())?;
    check_finite("phi", phi.values())?;
    check_positive_phi(phi.values())?;
    if f.len() != phi.len() {
        return Err(FlowError::GridMismatch {
            expected: f.len(),
            found: phi.len(),
        });
    }
    Ok(ScalarField::from_vec_unchecked(
        f.grid(),
        ds_vec(f.values(), phi.values(), f.grid()),
    ))
}

/// Second arclength derivative, computed as two nested [`s_derivative`]
/// applications.
pub fn s_second_derivative(f: &ScalarField, phi: &ScalarField) -> Result<ScalarField> {
    let first = s_derivative(f, phi)?;
    s_derivative(&first, phi)
}

/// Cumulative arclength `s(z_k)` with `s(0) = 0`, and the total length.
#[derive(Debug, Clone, PartialEq)]
pub struct Arclength {
    pub s: ScalarField,
    pub total: f64,
}

/// Trapezoidal arclength `s(z) = int_0^z phi`.
pub fn arclength(phi: &ScalarField) -> Result<Arclength> {
    check_finite("phi", phi.values())?;
    check_positive_phi(phi.values())?;
    let dz = phi.grid().dz();
    let v = phi.values();
    let n = v.len();
    let mut s = Vec::with_capacity(n);
    let mut acc = 0.0;
    s.push(acc);
    for k in 1..n {
        acc += 0.5 * dz * (v[k - 1] + v[k]);
        s.push(acc);
    }
    let total = acc + 0.5 * dz * (v[n - 1] + v[0]);
    Ok(Arclength {
        s: ScalarField::from_vec_unchecked(phi.grid(), s),
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Min,
    Max,
}

/// Global extremum and the lowest index attaining it.
pub fn extremum(f: &ScalarField, kind: ExtremumKind) -> (f64, usize) {
    extremum_slice(f.values(), kind)
}

pub(crate) fn extremum_slice(v: &[f64], kind: ExtremumKind) -> (f64, usize) {
    let mut best = (v[0], 0);
    for (k, &x) in v.iter().enumerate().skip(1) {
        let better = match kind {
            ExtremumKind::Min => x < best.0,
            ExtremumKind::Max => x > best.0,
        };
        if better {
            best = (x, k);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    fn max_err(f: &ScalarField, exact: impl Fn(f64) -> f64) -> f64 {
        f.grid()
            .points()
            .enumerate()
            .fold(0.0_f64, |m, (k, z)| m.max((f[k] - exact(z)).abs()))
    }

    #[test]
    fn grid_rejects_small_or_odd() {
        assert!(PeriodicGrid::new(6).is_err());
        assert!(PeriodicGrid::new(31).is_err());
        assert!(PeriodicGrid::new(8).is_ok());
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let f = ScalarField::constant(grid(64), 3.7).unwrap();
        let d = d_z(&f).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn derivative_of_sin_and_cos2() {
        let g = grid(64);
        let h4 = g.dz().powi(4);
        let d = d_z(&ScalarField::from_fn(g, f64::sin).unwrap()).unwrap();
        // leading error term is dz^4/30 * |f^(5)|
        assert!(max_err(&d, f64::cos) <= h4 / 30.0 * 1.01);
        let d = d_z(&ScalarField::from_fn(g, |z| (2.0 * z).cos()).unwrap()).unwrap();
        assert!(max_err(&d, |z| -2.0 * (2.0 * z).sin()) <= 64.0 * h4 / 30.0 * 1.01);
    }

    #[test]
    fn derivative_rejects_non_finite() {
        let g = grid(8);
        let mut v = vec![1.0; 8];
        v[3] = f64::NAN;
        let f = ScalarField::from_vec_unchecked(g, v);
        assert!(matches!(d_z(&f), Err(FlowError::NonFinite { index: 3, .. })));
        assert!(ScalarField::new(g, vec![f64::INFINITY; 8]).is_err());
    }

    #[test]
    fn convergence_order_matches_stencil() {
        for order in [StencilOrder::Second, StencilOrder::Fourth] {
            for k in [1.0, 3.0] {
                let err = |n: usize| {
                    let g = PeriodicGrid::with_order(n, order).unwrap();
                    let f = ScalarField::from_fn(g, |z| (k * z).sin()).unwrap();
                    max_err(&d_z(&f).unwrap(), |z| k * (k * z).cos())
                };
                let ratio = err(64) / err(128);
                let need = 2f64.powf(order.order() as f64 - 0.5);
                assert!(ratio >= need, "{order:?} k={k}: ratio {ratio} < {need}");
            }
        }
    }

    #[test]
    fn s_derivative_gauges() {
        let g = grid(64);
        let f = ScalarField::from_fn(g, f64::sin).unwrap();
        let two = ScalarField::constant(g, 2.0).unwrap();
        let d = s_derivative(&f, &two).unwrap();
        assert!(max_err(&d, |z| 0.5 * z.cos()) < 1e-5);

        let one = ScalarField::constant(g, 1.0).unwrap();
        assert_eq!(s_derivative(&f, &one).unwrap(), d_z(&f).unwrap());

        let phi = ScalarField::from_fn(g, |z| 2.0 + z.cos()).unwrap();
        let d = s_derivative(&f, &phi).unwrap();
        assert!(max_err(&d, |z| z.cos() / (2.0 + z.cos())) < 1e-5);
    }

    #[test]
    fn s_derivative_rejects_nonpositive_phi() {
        let g = grid(16);
        let f = ScalarField::from_fn(g, f64::sin).unwrap();
        let phi = ScalarField::from_fn(g, f64::cos).unwrap();
        assert!(matches!(
            s_derivative(&f, &phi),
            Err(FlowError::GaugeDegenerate { .. })
        ));
    }

    #[test]
    fn second_derivative_cases() {
        let g = grid(64);
        let one = ScalarField::constant(g, 1.0).unwrap();
        let d2 = s_second_derivative(&ScalarField::from_fn(g, f64::sin).unwrap(), &one).unwrap();
        assert!(max_err(&d2, |z| -z.sin()) < 1e-5);
        let d2 = s_second_derivative(&ScalarField::constant(g, 4.2).unwrap(), &one).unwrap();
        assert!(d2.values().iter().all(|&v| v == 0.0));
        let f = ScalarField::from_fn(g, |z| z.cos() + 1.5).unwrap();
        let d2 = s_second_derivative(&f, &one).unwrap();
        assert!(max_err(&d2, |z| -z.cos()) < 1e-5);
    }

    #[test]
    fn arclength_cases() {
        let g = grid(64);
        let arc = arclength(&ScalarField::constant(g, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(arc.total, 2.0 * PI, epsilon = 1e-12);
        assert!(max_err(&arc.s, |z| z) < 1e-12);

        let arc = arclength(&ScalarField::constant(g, 2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(arc.total, 4.0 * PI, epsilon = 1e-12);
        assert!(max_err(&arc.s, |z| 2.0 * z) < 1e-12);

        let arc = arclength(&ScalarField::from_fn(g, |z| 2.0 + z.cos()).unwrap()).unwrap();
        assert_abs_diff_eq!(arc.total, 4.0 * PI, epsilon = 1e-12);
        // cumulative trapezoid error is dz^2/12 * max|phi'|
        assert!(max_err(&arc.s, |z| 2.0 * z + z.sin()) < g.dz().powi(2) / 12.0 * 1.01);
        assert_eq!(arc.s[0], 0.0);
    }

    #[test]
    fn extremum_cases() {
        let g = grid(64);
        let a = ScalarField::from_fn(g, |z| z.cos() + 1.5).unwrap();
        let (v, k) = extremum(&a, ExtremumKind::Min);
        assert_eq!(k, 32);
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);

        let c = ScalarField::from_fn(g, |z| z.cos() + 3.5).unwrap();
        assert_eq!(extremum(&c, ExtremumKind::Max), (4.5, 0));

        let k = ScalarField::constant(g, 7.0).unwrap();
        assert_eq!(extremum(&k, ExtremumKind::Min), (7.0, 0));
        assert_eq!(extremum(&k, ExtremumKind::Max), (7.0, 0));
    }

    #[test]
    fn metric_state_rejects_nonpositive() {
        let g = grid(8);
        let one = |_: f64| 1.0;
        assert!(MetricState::from_profiles(g, one, |z| z.cos(), one, one).is_err());
        assert!(MetricState::from_profiles(g, |_| 0.0, one, one, one).is_err());
        assert!(MetricState::from_profiles(g, one, one, one, one).unwrap().is_ordered());
    }

    proptest! {
        #[test]
        fn d_z_is_linear(
            x in proptest::collection::vec(-10.0f64..10.0, 16),
            y in proptest::collection::vec(-10.0f64..10.0, 16),
            alpha in -3.0f64..3.0,
        ) {
            let g = grid(16);
            let fx = ScalarField::new(g, x.clone()).unwrap();
            let fy = ScalarField::new(g, y.clone()).unwrap();
            let combo = fx.zip_with(&fy, |p, q| alpha * p + q).unwrap();
            let lhs = d_z(&combo).unwrap();
            let rhs = d_z(&fx).unwrap().zip_with(&d_z(&fy).unwrap(), |p, q| alpha * p + q).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-9);
        }

        #[test]
        fn arclength_strictly_increasing(
            phi in proptest::collection::vec(0.01f64..5.0, 32),
        ) {
            let g = grid(32);
            let arc = arclength(&ScalarField::new(g, phi).unwrap()).unwrap();
            let s = arc.s.values();
            prop_assert!(s.windows(2).all(|w| w[1] > w[0]));
            prop_assert!(arc.total > s[31]);
        }
    }
}
