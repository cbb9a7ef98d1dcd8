//! Curvature of the warped metric `phi^2 dz^2 + a^2 w1^2 + b^2 w2^2 + c^2 w3^2`.
//!
//! Two independent routes are provided. The production path evaluates the
//! arclength-gauge closed forms (`K01 = -a''/a`, `K12 = -a'b'/(ab) + Khat12`,
//! ...) with chain-rule derivatives. The oracle path works in the z-gauge
//! directly on the metric coefficients `g00 = phi^2`, `g11 = a^2`, ..., with
//! the `g^00` terms kept explicit. Both converge to the same fields at the
//! stencil order.
//!
//! Fiber frame convention: `[E_i, E_j] = -2 eps_ijk E_k`, so the round fiber
//! `a = b = c = r` is a 3-sphere of radius `r`.

use crate::error::{FlowError, Result};
use crate::grid::{
    check_finite, check_positive_phi, ds_vec, dz_vec, MetricState, PeriodicGrid, ScalarField,
};

/// Fiber radii below this are treated as collapsed.
pub const DEGENERATE_RADIUS: f64 = 1e-8;

/// Pointwise curvature of a [`MetricState`]. Sectional curvatures and `ric00`
/// are orthonormal-frame values; `ric11..ric33` are `Ric(E_i, E_i)` on the
/// left-invariant fields, so the unit round fiber gives 2.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    pub k01: ScalarField,
    pub k02: ScalarField,
    pub k03: ScalarField,
    pub k12: ScalarField,
    pub k13: ScalarField,
    pub k23: ScalarField,
    pub khat12: ScalarField,
    pub khat13: ScalarField,
    pub khat23: ScalarField,
    pub ric00: ScalarField,
    pub ric11: ScalarField,
    pub ric22: ScalarField,
    pub ric33: ScalarField,
    pub scal: ScalarField,
    pub rm_norm_sq: ScalarField,
}

impl CurvatureField {
    /// `|Rm|` at each grid point.
    pub fn rm_norm(&self) -> ScalarField {
        self.rm_norm_sq.map(f64::sqrt)
    }
}

pub(crate) fn check_fibers(a: &[f64], b: &[f64], c: &[f64]) -> Result<()> {
    for (name, f) in [("a", a), ("b", b), ("c", c)] {
        check_finite(name, f)?;
        if let Some((index, &value)) = f
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= DEGENERATE_RADIUS))
        {
            return Err(FlowError::DegenerateFiber {
                field: name,
                index,
                value,
            });
        }
    }
    Ok(())
}

fn check_state(state: &MetricState) -> Result<()> {
    check_finite("phi", state.phi().values())?;
    check_positive_phi(state.phi().values())?;
    check_fibers(state.a().values(), state.b().values(), state.c().values())
}

/// Sectional curvatures `(Khat12, Khat13, Khat23)` of the left-invariant
/// fiber metric with radii `(a, b, c)`.
#[inline]
pub fn fiber_sectional_point(a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let (a2, b2, c2) = (a * a, b * b, c * c);
    let abc2 = a2 * b2 * c2;
    let k12 = ((a2 - b2).powi(2) - 3.0 * c2 * c2) / abc2 + 2.0 / a2 + 2.0 / b2;
    let k13 = ((a2 - c2).powi(2) - 3.0 * b2 * b2) / abc2 + 2.0 / a2 + 2.0 / c2;
    let k23 = ((b2 - c2).powi(2) - 3.0 * a2 * a2) / abc2 + 2.0 / b2 + 2.0 / c2;
    (k12, k13, k23)
}

/// Fiber sectional curvatures over the grid.
pub fn fiber_sectional(state: &MetricState) -> Result<(ScalarField, ScalarField, ScalarField)> {
    let (a, b, c) = (state.a().values(), state.b().values(), state.c().values());
    check_fibers(a, b, c)?;
    let n = a.len();
    let (mut k12, mut k13, mut k23) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        (k12[k], k13[k], k23[k]) = fiber_sectional_point(a[k], b[k], c[k]);
    }
    let grid = state.grid();
    Ok((
        ScalarField::from_vec_unchecked(grid, k12),
        ScalarField::from_vec_unchecked(grid, k13),
        ScalarField::from_vec_unchecked(grid, k23),
    ))
}

/// First and second arclength derivatives of the three radii.
pub(crate) struct RadiusDerivatives {
    pub ap: Vec<f64>,
    pub bp: Vec<f64>,
    pub cp: Vec<f64>,
    pub app: Vec<f64>,
    pub bpp: Vec<f64>,
    pub cpp: Vec<f64>,
}

impl RadiusDerivatives {
    pub fn of(state: &MetricState) -> Self {
        Self::from_slices(
            state.grid(),
            state.phi().values(),
            state.a().values(),
            state.b().values(),
            state.c().values(),
        )
    }

    pub fn from_slices(grid: PeriodicGrid, phi: &[f64], a: &[f64], b: &[f64], c: &[f64]) -> Self {
        let ap = ds_vec(a, phi, grid);
        let bp = ds_vec(b, phi, grid);
        let cp = ds_vec(c, phi, grid);
        let app = ds_vec(&ap, phi, grid);
        let bpp = ds_vec(&bp, phi, grid);
        let cpp = ds_vec(&cp, phi, grid);
        Self {
            ap,
            bp,
            cp,
            app,
            bpp,
            cpp,
        }
    }
}

/// Closed-form curvature of the ansatz metric, including the Ricci diagonal,
/// the scalar curvature and `|Rm|^2`.
pub fn sectional_curvatures(state: &MetricState) -> Result<CurvatureField> {
    check_state(state)?;
    let d = RadiusDerivatives::of(state);
    Ok(assemble(state, &d))
}

pub(crate) fn assemble(state: &MetricState, d: &RadiusDerivatives) -> CurvatureField {
    let (a, b, c) = (state.a().values(), state.b().values(), state.c().values());
    let n = a.len();
    let mut out: [Vec<f64>; 15] = std::array::from_fn(|_| vec![0.0; n]);
    for k in 0..n {
        let (a, b, c) = (a[k], b[k], c[k]);
        let (ap, bp, cp) = (d.ap[k], d.bp[k], d.cp[k]);
        let (app, bpp, cpp) = (d.app[k], d.bpp[k], d.cpp[k]);
        let (h12, h13, h23) = fiber_sectional_point(a, b, c);

        let k01 = -app / a;
        let k02 = -bpp / b;
        let k03 = -cpp / c;
        let k12 = -ap * bp / (a * b) + h12;
        let k13 = -ap * cp / (a * c) + h13;
        let k23 = -bp * cp / (b * c) + h23;

        let ric00 = -(app / a + bpp / b + cpp / c);
        let ric11 = -a * app - a * ap * (bp / b + cp / c) + a * a * (h12 + h13);
        let ric22 = -b * bpp - b * bp * (ap / a + cp / c) + b * b * (h12 + h23);
        let ric33 = -c * cpp - c * cp * (ap / a + bp / b) + c * c * (h13 + h23);

        let scal = 2.0 * (k01 + k02 + k03 + k12 + k13 + k23);
        let rm = 2.0
            * (k01 * k01 + k02 * k02 + k03 * k03 + k12 * k12 + k13 * k13 + k23 * k23);

        let row = [
            k01, k02, k03, k12, k13, k23, h12, h13, h23, ric00, ric11, ric22, ric33, scal, rm,
        ];
        for (col, v) in out.iter_mut().zip(row) {
            col[k] = v;
        }
    }
    let grid = state.grid();
    let [k01, k02, k03, k12, k13, k23, khat12, khat13, khat23, ric00, ric11, ric22, ric33, scal, rm_norm_sq] =
        out.map(|v| ScalarField::from_vec_unchecked(grid, v));
    CurvatureField {
        k01,
        k02,
        k03,
        k12,
        k13,
        k23,
        khat12,
        khat13,
        khat23,
        ric00,
        ric11,
        ric22,
        ric33,
        scal,
        rm_norm_sq,
    }
}

/// Scalar curvature from its explicit expression in `a, b, c` and their
/// arclength derivatives, independent of the sectional curvature assembly.
pub fn scalar_curvature(state: &MetricState) -> Result<ScalarField> {
    check_state(state)?;
    let d = RadiusDerivatives::of(state);
    let (a, b, c) = (state.a().values(), state.b().values(), state.c().values());
    let s = (0..a.len())
        .map(|k| {
            let (a, b, c) = (a[k], b[k], c[k]);
            let (a2, b2, c2) = (a * a, b * b, c * c);
            let fiber = (2.0 * a2 * b2 + 2.0 * a2 * c2 + 2.0 * b2 * c2
                - a2 * a2
                - b2 * b2
                - c2 * c2)
                / (a2 * b2 * c2);
            2.0 * (-d.app[k] / a - d.bpp[k] / b - d.cpp[k] / c
                - d.ap[k] * d.bp[k] / (a * b)
                - d.ap[k] * d.cp[k] / (a * c)
                - d.bp[k] * d.cp[k] / (b * c)
                + fiber)
        })
        .collect();
    Ok(ScalarField::from_vec_unchecked(state.grid(), s))
}

/// Levi-Civita symbol on fiber indices `1..=3`.
fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (1, 2, 3) | (2, 3, 1) | (3, 1, 2) => 1.0,
        (3, 2, 1) | (1, 3, 2) | (2, 1, 3) => -1.0,
        _ => 0.0,
    }
}

/// Frame symbols `Sigma^gamma_{alpha beta}` of the z-gauge frame
/// `{d/dz, E_1, E_2, E_3}`, stored per grid point as `sigma[alpha][beta][gamma]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSymbols {
    pub sigma: Vec<[[[f64; 4]; 4]; 4]>,
}

impl FrameSymbols {
    /// `Sigma^gamma_{alpha beta}` at grid point `k`.
    pub fn get(&self, k: usize, alpha: usize, beta: usize, gamma: usize) -> f64 {
        self.sigma[k][alpha][beta][gamma]
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

/// Metric coefficients `g00, g11, g22, g33` and their z-derivatives.
struct ZGaugeMetric {
    g: [Vec<f64>; 4],
    dg: [Vec<f64>; 4],
    ddg: [Vec<f64>; 4],
}

impl ZGaugeMetric {
    fn of(state: &MetricState) -> Self {
        let grid = state.grid();
        let sq = |f: &ScalarField| f.values().iter().map(|v| v * v).collect::<Vec<_>>();
        let g = [sq(state.phi()), sq(state.a()), sq(state.b()), sq(state.c())];
        let dg = g.clone().map(|gi| dz_vec(&gi, grid));
        let ddg = dg.clone().map(|d| dz_vec(&d, grid));
        Self { g, dg, ddg }
    }
}

/// Frame symbols computed from the Koszul formula in the z-gauge, with
/// z-derivatives of the metric coefficients taken by the grid stencil.
pub fn frame_symbol_oracle(state: &MetricState) -> Result<FrameSymbols> {
    check_state(state)?;
    let m = ZGaugeMetric::of(state);
    let n = state.grid().n();
    let mut sigma = vec![[[[0.0; 4]; 4]; 4]; n];
    for (k, s) in sigma.iter_mut().enumerate() {
        let g = |i: usize| m.g[i][k];
        let dg = |i: usize| m.dg[i][k];
        s[0][0][0] = 0.5 * dg(0) / g(0);
        for i in 1..4 {
            s[i][0][i] = 0.5 * dg(i) / g(i);
            s[0][i][i] = 0.5 * dg(i) / g(i);
            s[i][i][0] = -0.5 * dg(i) / g(0);
            for j in 1..4 {
                for l in 1..4 {
                    let eps = levi_civita(i, j, l);
                    if eps != 0.0 {
                        s[i][j][l] = eps * (g(i) - g(j) - g(l)) / g(l);
                    }
                }
            }
        }
    }
    Ok(FrameSymbols { sigma })
}

/// Frame-component Riemann tensor values from the z-gauge formulas, with
/// their normalisations to sectional curvatures.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannOracle {
    /// `Rm_{0ii0}` for `i = 1, 2, 3`.
    pub rm0ii0: [ScalarField; 3],
    /// `Rm_{ijji}` for pairs `(1,2), (1,3), (2,3)`.
    pub rmijji: [ScalarField; 3],
    /// `K_{0i} = Rm_{0ii0} / (g00 gii)`.
    pub k0i: [ScalarField; 3],
    /// `K_{ij} = Rm_{ijji} / (gii gjj)`.
    pub kij: [ScalarField; 3],
}

pub(crate) const FIBER_PAIRS: [(usize, usize, usize); 3] = [(1, 2, 3), (1, 3, 2), (2, 3, 1)];

/// Riemann components from the z-gauge metric coefficients:
///
/// `Rm_0ii0 = (g^00 dg00 dgii + g^ii dgii^2 - 2 ddgii) / 4`
/// `Rm_ijji = -g^00 dgii dgjj / 4 - g^kk (gkk^2 - (gii - gjj)^2) - 2 (gkk - gjj - gii)`
pub fn riemann_oracle(state: &MetricState) -> Result<RiemannOracle> {
    check_state(state)?;
    let m = ZGaugeMetric::of(state);
    let grid = state.grid();
    let n = grid.n();
    let field = |v: Vec<f64>| ScalarField::from_vec_unchecked(grid, v);

    let rm0ii0: [Vec<f64>; 3] = std::array::from_fn(|idx| {
        let i = idx + 1;
        (0..n)
            .map(|k| {
                0.25 * (m.dg[0][k] * m.dg[i][k] / m.g[0][k] + m.dg[i][k].powi(2) / m.g[i][k]
                    - 2.0 * m.ddg[i][k])
            })
            .collect()
    });
    let rmijji: [Vec<f64>; 3] = std::array::from_fn(|idx| {
        let (i, j, l) = FIBER_PAIRS[idx];
        (0..n)
            .map(|k| {
                let (gi, gj, gl) = (m.g[i][k], m.g[j][k], m.g[l][k]);
                let hat = -(gl * gl - (gi - gj).powi(2)) / gl - 2.0 * (gl - gj - gi);
                -0.25 * m.dg[i][k] * m.dg[j][k] / m.g[0][k] + hat
            })
            .collect()
    });
    let k0i: [Vec<f64>; 3] = std::array::from_fn(|idx| {
        let i = idx + 1;
        (0..n)
            .map(|k| rm0ii0[idx][k] / (m.g[0][k] * m.g[i][k]))
            .collect()
    });
    let kij: [Vec<f64>; 3] = std::array::from_fn(|idx| {
        let (i, j, _) = FIBER_PAIRS[idx];
        (0..n)
            .map(|k| rmijji[idx][k] / (m.g[i][k] * m.g[j][k]))
            .collect()
    });
    Ok(RiemannOracle {
        rm0ii0: rm0ii0.map(field),
        rmijji: rmijji.map(field),
        k0i: k0i.map(field),
        kij: kij.map(field),
    })
}

/// Max-norm mismatch between the closed-form sectional curvatures and the
/// z-gauge oracle, over all six planes.
pub fn oracle_mismatch(state: &MetricState) -> Result<f64> {
    let closed = sectional_curvatures(state)?;
    let oracle = riemann_oracle(state)?;
    let pairs = [
        (&closed.k01, &oracle.k0i[0]),
        (&closed.k02, &oracle.k0i[1]),
        (&closed.k03, &oracle.k0i[2]),
        (&closed.k12, &oracle.kij[0]),
        (&closed.k13, &oracle.kij[1]),
        (&closed.k23, &oracle.kij[2]),
    ];
    let mut worst = 0.0_f64;
    for (x, y) in pairs {
        worst = worst.max(x.max_abs_diff(y)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constant_state(n: usize, phi: f64, a: f64, b: f64, c: f64) -> MetricState {
        let g = PeriodicGrid::new(n).unwrap();
        MetricState::from_profiles(g, |_| phi, |_| a, |_| b, |_| c).unwrap()
    }

    fn all_close(f: &ScalarField, v: f64, tol: f64) -> bool {
        f.values().iter().all(|x| (x - v).abs() <= tol)
    }

    #[test]
    fn round_fiber_khat() {
        let s = constant_state(16, 1.0, 1.7, 1.7, 1.7);
        let (k12, k13, k23) = fiber_sectional(&s).unwrap();
        let r2 = 1.7 * 1.7;
        for f in [&k12, &k13, &k23] {
            assert!(all_close(f, 1.0 / r2, 1e-14));
        }
    }

    #[test]
    fn khat_hand_values() {
        // a = 1, b = c = 2
        let (k12, k13, k23) = fiber_sectional_point(1.0, 2.0, 2.0);
        assert_abs_diff_eq!(k23, 13.0 / 16.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k12, 1.0 / 16.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k13, 1.0 / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn khat_homogeneity_and_symmetry() {
        let (a, b, c, lam) = (0.7, 1.3, 2.1, 3.0);
        let base = fiber_sectional_point(a, b, c);
        let scaled = fiber_sectional_point(lam * a, lam * b, lam * c);
        assert_abs_diff_eq!(scaled.0 * lam * lam, base.0, epsilon = 1e-13);
        assert_abs_diff_eq!(scaled.1 * lam * lam, base.1, epsilon = 1e-13);
        assert_abs_diff_eq!(scaled.2 * lam * lam, base.2, epsilon = 1e-13);
        // swapping a <-> c maps (K12, K13, K23) to (K23, K13, K12)
        let swapped = fiber_sectional_point(c, b, a);
        assert_abs_diff_eq!(swapped.0, base.2, epsilon = 1e-13);
        assert_abs_diff_eq!(swapped.1, base.1, epsilon = 1e-13);
        assert_abs_diff_eq!(swapped.2, base.0, epsilon = 1e-13);
    }

    #[test]
    fn degenerate_fiber_rejected() {
        let s = constant_state(16, 1.0, 1e-9, 1.0, 1.0);
        assert!(matches!(
            sectional_curvatures(&s),
            Err(FlowError::DegenerateFiber { field: "a", .. })
        ));
        assert!(fiber_sectional(&s).is_err());
    }

    #[test]
    fn round_state_curvature() {
        let r: f64 = 1.3;
        let s = constant_state(32, 1.0, r, r, r);
        let k = sectional_curvatures(&s).unwrap();
        for f in [&k.k01, &k.k02, &k.k03] {
            assert!(all_close(f, 0.0, 0.0));
        }
        for f in [&k.k12, &k.k13, &k.k23] {
            assert!(all_close(f, 1.0 / (r * r), 1e-14));
        }
        assert!(all_close(&k.scal, 6.0 / (r * r), 1e-13));
        assert!(all_close(&k.rm_norm_sq, 6.0 / r.powi(4), 1e-13));
        for f in [&k.ric11, &k.ric22, &k.ric33] {
            assert!(all_close(f, 2.0, 1e-13));
        }
        assert!(all_close(&k.ric00, 0.0, 0.0));
    }

    #[test]
    fn k01_of_cosine_profile() {
        let g = PeriodicGrid::new(128).unwrap();
        let s = MetricState::from_profiles(g, |_| 1.0, |z| z.cos() + 1.5, |_| 3.0, |_| 4.0)
            .unwrap();
        let k = sectional_curvatures(&s).unwrap();
        for (i, z) in g.points().enumerate() {
            assert_abs_diff_eq!(k.k01[i], z.cos() / (z.cos() + 1.5), epsilon = 1e-5);
        }
    }

    #[test]
    fn trace_identities_are_bitwise() {
        let g = PeriodicGrid::new(64).unwrap();
        let s = MetricState::from_profiles(
            g,
            |z| 1.0 + 0.2 * z.sin(),
            |z| z.cos() + 1.5,
            |z| z.cos() + 2.5,
            |z| z.cos() + 3.5,
        )
        .unwrap();
        let k = sectional_curvatures(&s).unwrap();
        for i in 0..g.n() {
            let ks = [k.k01[i], k.k02[i], k.k03[i], k.k12[i], k.k13[i], k.k23[i]];
            assert_eq!(k.scal[i], 2.0 * (ks[0] + ks[1] + ks[2] + ks[3] + ks[4] + ks[5]));
            let sq = ks.map(|v| v * v);
            assert_eq!(k.rm_norm_sq[i], 2.0 * (sq[0] + sq[1] + sq[2] + sq[3] + sq[4] + sq[5]));
            assert_abs_diff_eq!(k.ric00[i], ks[0] + ks[1] + ks[2], epsilon = 1e-12);
        }
        // explicit scalar formula agrees up to rounding
        let direct = scalar_curvature(&s).unwrap();
        assert!(direct.max_abs_diff(&k.scal).unwrap() < 1e-11);
    }

    #[test]
    fn biaxial_symmetry_exact() {
        let g = PeriodicGrid::new(64).unwrap();
        let s = MetricState::from_profiles(
            g,
            |z| 1.0 + 0.1 * z.cos(),
            |z| 0.5 * z.cos() + 1.0,
            |z| z.cos() + 2.0,
            |z| z.cos() + 2.0,
        )
        .unwrap();
        let k = sectional_curvatures(&s).unwrap();
        assert_eq!(k.k02, k.k03);
        assert_eq!(k.k12, k.k13);
    }

    #[test]
    fn scalar_curvature_equal_radii() {
        let g = PeriodicGrid::new(128).unwrap();
        let s = MetricState::from_profiles(
            g,
            |_| 1.0,
            |z| z.cos() + 2.0,
            |z| z.cos() + 2.0,
            |z| z.cos() + 2.0,
        )
        .unwrap();
        let sc = scalar_curvature(&s).unwrap();
        for (i, z) in g.points().enumerate() {
            let a = z.cos() + 2.0;
            let (ap, app) = (-z.sin(), -z.cos());
            let exact = 2.0 * (-3.0 * app / a - 3.0 * ap * ap / (a * a) + 3.0 / (a * a));
            assert_abs_diff_eq!(sc[i], exact, epsilon = 1e-5);
        }
        let round = scalar_curvature(&constant_state(16, 1.0, 2.0, 2.0, 2.0)).unwrap();
        assert!(all_close(&round, 1.5, 1e-14));
    }

    #[test]
    fn frame_symbols_round_unit() {
        let s = constant_state(16, 1.0, 1.0, 1.0, 1.0);
        let fs = frame_symbol_oracle(&s).unwrap();
        for k in 0..fs.len() {
            for i in 1..4 {
                for j in 1..4 {
                    for l in 1..4 {
                        assert_eq!(fs.get(k, i, j, l), -levi_civita(i, j, l));
                    }
                }
                assert_eq!(fs.get(k, 0, i, i), 0.0);
                assert_eq!(fs.get(k, i, i, 0), 0.0);
            }
            assert_eq!(fs.get(k, 0, 0, 0), 0.0);
        }
    }

    #[test]
    fn frame_symbol_structure() {
        let g = PeriodicGrid::new(32).unwrap();
        let s = MetricState::from_profiles(
            g,
            |z| 1.0 + 0.3 * z.sin(),
            |z| z.cos() + 1.5,
            |z| z.sin() + 4.0,
            |_| 6.0,
        )
        .unwrap();
        let fs = frame_symbol_oracle(&s).unwrap();
        for k in 0..fs.len() {
            for i in 1..4 {
                // exactly two zero indices
                assert_eq!(fs.get(k, 0, i, 0), 0.0);
                assert_eq!(fs.get(k, i, 0, 0), 0.0);
                assert_eq!(fs.get(k, 0, 0, i), 0.0);
                for j in 1..4 {
                    if i != j {
                        let l = 6 - i - j;
                        // torsion-free: Sigma^l_ij - Sigma^l_ji = -2 eps_ijl
                        assert_abs_diff_eq!(
                            fs.get(k, i, j, l) - fs.get(k, j, i, l),
                            -2.0 * levi_civita(i, j, l),
                            epsilon = 1e-13
                        );
                        let expect = levi_civita(i, j, l)
                            * (fs_g(&s, i, k) - fs_g(&s, j, k) - fs_g(&s, l, k))
                            / fs_g(&s, l, k);
                        assert_abs_diff_eq!(fs.get(k, i, j, l), expect, epsilon = 1e-14);
                    }
                }
            }
        }
    }

    fn fs_g(s: &MetricState, i: usize, k: usize) -> f64 {
        let f = match i {
            1 => s.a(),
            2 => s.b(),
            _ => s.c(),
        };
        f[k] * f[k]
    }

    #[test]
    fn biaxial_equal_radii_symbol() {
        let s = constant_state(16, 1.0, 1.5, 1.5, 1.5);
        let fs = frame_symbol_oracle(&s).unwrap();
        // Sigma^1_23 = eps_231 g^11 (g22 - g33 - g11) = -1 when all radii agree
        assert_abs_diff_eq!(fs.get(0, 2, 3, 1), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn oracle_matches_round_case() {
        let r: f64 = 1.25;
        let s = constant_state(16, 1.0, r, r, r);
        let o = riemann_oracle(&s).unwrap();
        for f in &o.k0i {
            assert!(all_close(f, 0.0, 0.0));
        }
        for f in &o.kij {
            assert!(all_close(f, 1.0 / (r * r), 1e-14));
        }
    }

    #[test]
    fn oracle_mismatch_shrinks_with_refinement() {
        let mk = |n: usize| {
            let g = PeriodicGrid::new(n).unwrap();
            MetricState::from_profiles(
                g,
                |z| 1.0 + 0.3 * z.sin(),
                |z| z.cos() + 1.5,
                |z| z.cos() + 2.5,
                |z| z.cos() + 3.5,
            )
            .unwrap()
        };
        let e: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| oracle_mismatch(&mk(n)).unwrap())
            .collect();
        for w in e.windows(2) {
            assert!((w[0] / w[1]).log2() >= 3.5, "{e:?}");
        }
    }

    #[test]
    fn frame_symbols_reproduce_rm0ii0() {
        // Rm_{i00i} = gii (S000 Sii0 - dz Sii0 - Sii0 S0ii), via the Koszul symbols
        let g = PeriodicGrid::new(128).unwrap();
        let s = MetricState::from_profiles(
            g,
            |z| 1.0 + 0.3 * z.sin(),
            |z| 0.5 * z.cos() + 1.0,
            |z| z.cos() + 2.0,
            |z| 2.0 * z.cos() + 4.0,
        )
        .unwrap();
        let fs = frame_symbol_oracle(&s).unwrap();
        let o = riemann_oracle(&s).unwrap();
        for i in 1..4 {
            let sii0: Vec<f64> = (0..g.n()).map(|k| fs.get(k, i, 0, i)).collect();
            let d = dz_vec(&sii0, g);
            for k in 0..g.n() {
                let via = fs_g(&s, i, k)
                    * (fs.get(k, 0, 0, 0) * sii0[k] - d[k] - sii0[k] * fs.get(k, 0, i, i));
                assert_abs_diff_eq!(via, o.rm0ii0[i - 1][k], epsilon = 1e-4);
            }
        }
    }
}
