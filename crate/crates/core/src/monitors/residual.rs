//! Curvature-evolution residuals: `dK0i/dt` by time differencing of
//! snapshots against the closed-form right-hand side of its evolution PDE.

use serde::{Deserialize, Serialize};

use crate::curvature::{assemble, RadiusDerivatives};
use crate::error::{FlowError, Result};
use crate::grid::{ds_vec, MetricState};

/// Which mixed sectional curvature to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum K0 {
    K01,
    K02,
    K03,
}

impl K0 {
    pub fn name(self) -> &'static str {
        match self {
            K0::K01 => "K01",
            K0::K02 => "K02",
            K0::K03 => "K03",
        }
    }
}

/// Right-hand side of `dK0x/dt` at one point. `x` is the distinguished
/// radius, `y` and `w` the other two; `k*` are the matching `K0*` values and
/// `lap_kx` is `Delta_g K0x`. The expression is symmetric in `(y, w)`, so
/// each `K0i` uses the same function with its radius moved to the front.
#[allow(clippy::too_many_arguments)]
fn k0_rhs_point(
    (x, xp): (f64, f64),
    (y, yp): (f64, f64),
    (w, wp): (f64, f64),
    kx: f64,
    ky: f64,
    kw: f64,
    lap_kx: f64,
) -> f64 {
    let (x2, y2, w2) = (x * x, y * y, w * w);
    let q = x2 * y2 * w2;
    lap_kx + 2.0 * kx * kx
        - 2.0 * kx * (yp * yp / y2 + wp * wp / w2 + (2.0 * x2 * x2 + 2.0 * (y2 - w2).powi(2)) / q)
        + 2.0 * ky * (2.0 * x2 / (y2 * w2) + 2.0 * y2 / (x2 * w2) - 2.0 * w2 / (x2 * y2) - xp * yp / (x * y))
        + 2.0 * kw * (2.0 * x2 / (y2 * w2) + 2.0 * w2 / (x2 * y2) - 2.0 * y2 / (x2 * w2) - xp * wp / (x * w))
        + 2.0 * xp / x
            * (-yp.powi(3) / (y2 * y) - wp.powi(3) / (w2 * w)
                + 6.0 * x * xp / (y2 * w2)
                + 4.0 * y * yp / (x2 * w2)
                + 4.0 * w * wp / (x2 * y2)
                - 2.0 * xp * w2 / (x2 * x * y2)
                - 2.0 * xp * y2 / (x2 * x * w2)
                + 4.0 * xp / (x2 * x)
                - 12.0 * x2 * yp / (y2 * y * w2)
                - 12.0 * x2 * wp / (y2 * w2 * w)
                - 4.0 * y2 * wp / (x2 * w2 * w)
                - 4.0 * w2 * yp / (x2 * y2 * y))
        + 4.0 * x2 * (3.0 * yp * yp / (y2 * y2 * w2) + 4.0 * yp * wp / (y2 * y * w2 * w) + 3.0 * wp * wp / (y2 * w2 * w2))
        - 4.0 / x
            * (wp * wp / (x * y2) + yp * yp / (x * w2) + 3.0 * yp * yp * w2 / (x * y2 * y2)
                + 3.0 * y2 * wp * wp / (x * w2 * w2)
                - 4.0 * w * wp * yp / (x * y2 * y)
                - 4.0 * y * yp * wp / (x * w2 * w))
}

/// Closed-form `dK0i/dt` over the grid at `state`.
pub fn k0_evolution_rhs(state: &MetricState, which: K0) -> Result<Vec<f64>> {
    let curv = crate::curvature::sectional_curvatures(state)?;
    let d = RadiusDerivatives::of(state);
    let grid = state.grid();
    let phi = state.phi().values();
    let (a, b, c) = (state.a().values(), state.b().values(), state.c().values());
    let (k01, k02, k03) = (curv.k01.values(), curv.k02.values(), curv.k03.values());
    let target = match which {
        K0::K01 => k01,
        K0::K02 => k02,
        K0::K03 => k03,
    };
    let kp = ds_vec(target, phi, grid);
    let kpp = ds_vec(&kp, phi, grid);
    let out = (0..a.len())
        .map(|k| {
            let lap = kpp[k] + (d.ap[k] / a[k] + d.bp[k] / b[k] + d.cp[k] / c[k]) * kp[k];
            let ra = (a[k], d.ap[k]);
            let rb = (b[k], d.bp[k]);
            let rc = (c[k], d.cp[k]);
            match which {
                K0::K01 => k0_rhs_point(ra, rb, rc, k01[k], k02[k], k03[k], lap),
                K0::K02 => k0_rhs_point(rb, ra, rc, k02[k], k01[k], k03[k], lap),
                K0::K03 => k0_rhs_point(rc, ra, rb, k03[k], k01[k], k02[k], lap),
            }
        })
        .collect();
    Ok(out)
}

fn k0_field(state: &MetricState, which: K0) -> Vec<f64> {
    let d = RadiusDerivatives::of(state);
    let curv = assemble(state, &d);
    match which {
        K0::K01 => curv.k01.into_values(),
        K0::K02 => curv.k02.into_values(),
        K0::K03 => curv.k03.into_values(),
    }
}

/// Residual of the `K0i` evolution at the middle of three snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSample {
    pub which: K0,
    /// Time of the middle snapshot.
    pub t: f64,
    /// `max_z |dK/dt - rhs|`.
    pub residual: f64,
    pub residual_index: usize,
    /// `max_z |rhs|`, for scale.
    pub rhs_max: f64,
}

/// Max-norm residual at the middle of `(s0, s1, s2)`, with `dK/dt` from the
/// three-point (possibly nonuniform) central difference.
pub fn k0_residual(
    s0: &MetricState,
    s1: &MetricState,
    s2: &MetricState,
    which: K0,
) -> Result<ResidualSample> {
    let (h1, h2) = (s1.t - s0.t, s2.t - s1.t);
    if !(h1 > 0.0 && h2 > 0.0) {
        return Err(FlowError::InvalidArgument(
            "snapshots must have strictly increasing times".into(),
        ));
    }
    let rhs = k0_evolution_rhs(s1, which)?;
    let (k0, k1, k2) = (k0_field(s0, which), k0_field(s1, which), k0_field(s2, which));
    let (w0, w1, w2) = (
        -h2 / (h1 * (h1 + h2)),
        (h2 - h1) / (h1 * h2),
        h1 / (h2 * (h1 + h2)),
    );
    let mut best = (0.0_f64, 0usize);
    for k in 0..rhs.len() {
        let dk = w0 * k0[k] + w1 * k1[k] + w2 * k2[k];
        let r = (dk - rhs[k]).abs();
        if !(r <= best.0) {
            best = (r, k);
        }
    }
    Ok(ResidualSample {
        which,
        t: s1.t,
        residual: best.0,
        residual_index: best.1,
        rhs_max: rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::rk4_step;
    use crate::grid::PeriodicGrid;
    use approx::assert_abs_diff_eq;

    fn constant(a: f64, b: f64, c: f64) -> MetricState {
        let g = PeriodicGrid::new(16).unwrap();
        MetricState::from_profiles(g, |_| 1.0, |_| a, |_| b, |_| c).unwrap()
    }

    #[test]
    fn round_sphere_is_zero() {
        let s = constant(1.5, 1.5, 1.5);
        for which in [K0::K01, K0::K02, K0::K03] {
            assert!(k0_evolution_rhs(&s, which).unwrap().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn homogeneous_data_has_zero_k0() {
        // z-constant radii stay z-constant, so K0i and both sides vanish
        let s0 = constant(1.0, 2.0, 3.0);
        let s1 = rk4_step(&s0, 1e-4).unwrap();
        let s2 = rk4_step(&s1, 1e-4).unwrap();
        let r = k0_residual(&s0, &s1, &s2, K0::K01).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.rhs_max, 0.0);
    }

    fn smooth_state(n: usize) -> MetricState {
        let g = PeriodicGrid::new(n).unwrap();
        MetricState::from_profiles(
            g,
            |z| 1.0 + 0.3 * z.sin(),
            |z| 1.5 + z.cos() + 0.2 * (2.0 * z).sin(),
            |z| 2.5 + 0.5 * z.cos() + z.sin() / 3.0,
            |z| 3.5 + 0.25 * (2.0 * z).cos(),
        )
        .unwrap()
    }

    #[test]
    fn rhs_matches_symbolic_values() {
        // exact dK0i/dt at z = 2 pi 28/256, from symbolic differentiation of
        // -x''/x along the flow
        let s = smooth_state(256);
        let expect = [
            (K0::K01, 0.00885404022875197),
            (K0::K02, 0.0230889402149917),
            (K0::K03, 0.557366839942417),
        ];
        for (which, v) in expect {
            let r = k0_evolution_rhs(&s, which).unwrap();
            assert_abs_diff_eq!(r[28], v, epsilon = 1e-6);
        }
    }

    #[test]
    fn matches_finite_difference_in_time() {
        let h = 1e-5;
        let s0 = smooth_state(128);
        let s1 = rk4_step(&s0, h).unwrap();
        let s2 = rk4_step(&s1, h).unwrap();
        for which in [K0::K01, K0::K02, K0::K03] {
            let r = k0_residual(&s0, &s1, &s2, which).unwrap();
            assert!(r.residual < 1e-3 * r.rhs_max.max(1.0), "{which:?} {r:?}");
        }
    }

    #[test]
    fn permutation_consistency() {
        // swapping the roles of a and c maps the K01 rhs onto the K03 rhs
        let g = PeriodicGrid::new(64).unwrap();
        let p = |z: f64| 1.0 + 0.2 * z.cos();
        let f = |z: f64| 1.5 + z.cos();
        let h = |z: f64| 3.5 + 0.7 * z.sin();
        let s = MetricState::from_profiles(g, p, f, |_| 2.0, h).unwrap();
        let swapped = MetricState::from_profiles(g, p, h, |_| 2.0, f).unwrap();
        let r1 = k0_evolution_rhs(&s, K0::K01).unwrap();
        let r3 = k0_evolution_rhs(&swapped, K0::K03).unwrap();
        for (x, y) in r1.iter().zip(&r3) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10 * x.abs().max(1.0));
        }
    }
}
