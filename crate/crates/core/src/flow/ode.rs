//! Homogeneous (z-constant) reduction of the flow: the Bianchi IX ODE
//! system, integrated with an embedded Dormand-Prince 5(4) pair.

use serde::{Deserialize, Serialize};

use crate::curvature::DEGENERATE_RADIUS;
use crate::error::{FlowError, Result};

/// Relative tolerance of the ODE oracle.
pub const ODE_RTOL: f64 = 1e-10;
/// Absolute tolerance of the ODE oracle.
pub const ODE_ATOL: f64 = 1e-12;

const MAX_STEPS: usize = 1_000_000;

/// Right-hand side `(da/dt, db/dt, dc/dt)` of the homogeneous system.
pub fn homogeneous_rates(y: [f64; 3]) -> [f64; 3] {
    let [a, b, c] = y;
    let (a2, b2, c2) = (a * a, b * b, c * c);
    let q = a2 * b2 * c2;
    [
        -2.0 * a * (a2 * a2 - (b2 - c2).powi(2)) / q,
        -2.0 * b * (b2 * b2 - (a2 - c2).powi(2)) / q,
        -2.0 * c * (c2 * c2 - (a2 - b2).powi(2)) / q,
    ]
}

/// Sampled solution `(a, b, c)(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<[f64; 3]>,
    /// True when a radius fell below the degeneracy threshold and
    /// integration stopped there.
    pub collapsed: bool,
}

impl OdeSolution {
    pub fn final_time(&self) -> f64 {
        *self.t.last().expect("solution holds the initial point")
    }

    pub fn final_value(&self) -> [f64; 3] {
        *self.y.last().expect("solution holds the initial point")
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn valid(y: &[f64; 3]) -> bool {
    y.iter().all(|v| v.is_finite() && *v > 0.0)
}

/// One Dormand-Prince trial step: returns the 5th-order value and the
/// scaled error norm.
fn trial(y: [f64; 3], h: f64) -> ([f64; 3], f64) {
    let mut k = [[0.0; 3]; 7];
    k[0] = homogeneous_rates(y);
    for s in 1..7 {
        let mut ys = y;
        for (m, v) in ys.iter_mut().enumerate() {
            for j in 0..s {
                *v += h * A[s][j] * k[j][m];
            }
        }
        if !valid(&ys) {
            return (ys, f64::INFINITY);
        }
        k[s] = homogeneous_rates(ys);
    }
    let mut out = y;
    let mut err2 = 0.0;
    for m in 0..3 {
        let mut inc = 0.0;
        let mut e = 0.0;
        for s in 0..7 {
            inc += B[s] * k[s][m];
            e += E[s] * k[s][m];
        }
        out[m] = y[m] + h * inc;
        let scale = ODE_ATOL + ODE_RTOL * y[m].abs().max(out[m].abs());
        err2 += (h * e / scale).powi(2);
    }
    if !valid(&out) {
        return (out, f64::INFINITY);
    }
    (out, (err2 / 3.0).sqrt())
}

fn check_initial(y: [f64; 3]) -> Result<()> {
    for (name, v) in ["a", "b", "c"].into_iter().zip(y) {
        if !(v.is_finite() && v > 0.0) {
            return Err(FlowError::InvalidArgument(format!(
                "initial radius {name} must be positive and finite, got {v}"
            )));
        }
    }
    Ok(())
}

/// Integrates from `y0` at `t = 0`, stopping exactly at every time in
/// `stops` (ascending). Every accepted step is recorded when `record_all`.
fn integrate(y0: [f64; 3], stops: &[f64], record_all: bool) -> Result<OdeSolution> {
    check_initial(y0)?;
    if stops.first().is_some_and(|t| !(*t >= 0.0)) || stops.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(FlowError::InvalidArgument(
            "output times must be ascending and nonnegative".into(),
        ));
    }
    let mut sol = OdeSolution {
        t: vec![0.0],
        y: vec![y0],
        collapsed: false,
    };
    let (mut t, mut y) = (0.0_f64, y0);
    let rate = homogeneous_rates(y0)
        .iter()
        .zip(&y0)
        .map(|(d, v)| (d / v).abs())
        .fold(0.0, f64::max);
    let mut h = if rate > 0.0 { 1e-3 / rate } else { 1e-3 };
    let mut steps = 0;
    for &stop in stops {
        while t < stop {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(FlowError::InvalidArgument(
                    "ODE oracle exceeded its step budget".into(),
                ));
            }
            let last = stop - t <= h;
            let hs = if last { stop - t } else { h };
            let (yn, err) = trial(y, hs);
            if err <= 1.0 {
                t = if last { stop } else { t + hs };
                y = yn;
                if record_all || t == stop {
                    sol.t.push(t);
                    sol.y.push(y);
                }
                if y.iter().any(|v| *v < DEGENERATE_RADIUS) {
                    sol.collapsed = true;
                    return Ok(sol);
                }
            }
            let fac = if err == 0.0 {
                5.0
            } else if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                0.25
            };
            // keep h from collapsing to the clipped stop length
            h = if last && err <= 1.0 { h.max(hs * fac) } else { hs * fac };
            if h < 1e-300 {
                sol.collapsed = true;
                return Ok(sol);
            }
        }
    }
    Ok(sol)
}

/// Integrates the homogeneous system from `(a0, b0, c0)` to `t_end` at
/// tolerance `1e-10`, recording every accepted step. Stops early when a
/// radius drops below `1e-8`.
pub fn homogeneous_ode_oracle(a0: f64, b0: f64, c0: f64, t_end: f64) -> Result<OdeSolution> {
    if !(t_end >= 0.0) {
        return Err(FlowError::InvalidArgument(format!(
            "t_end must be nonnegative, got {t_end}"
        )));
    }
    integrate([a0, b0, c0], &[t_end], true)
}

/// Like [`homogeneous_ode_oracle`] but records only the requested times
/// (ascending), which the integrator hits exactly.
pub fn homogeneous_ode_at(a0: f64, b0: f64, c0: f64, times: &[f64]) -> Result<OdeSolution> {
    integrate([a0, b0, c0], times, false)
}
