//! Time evolution of a [`MetricState`] by classical RK4 in the method of
//! lines, with adaptive steps, per-step summaries and singular-time fits.
//!
//! The evolved variables are `(log phi, a, b, c)`. All spatial derivatives
//! are arclength derivatives taken through the chain rule on the fixed z grid.

mod ode;

pub use ode::{homogeneous_ode_at, homogeneous_ode_oracle, homogeneous_rates, OdeSolution};
pub use ode::{ODE_ATOL, ODE_RTOL};

use serde::{Deserialize, Serialize};

use crate::curvature::{assemble, RadiusDerivatives, DEGENERATE_RADIUS};
use crate::error::{FlowError, Result};
use crate::grid::{
    check_finite, check_positive_phi, extremum_slice, ExtremumKind, MetricState, PeriodicGrid,
    ScalarField,
};

/// Stepping and stopping policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// Safety factor on the adaptive step, in `(0, 1]`.
    pub cfl_safety: f64,
    /// Stop once the minimum of `a` drops below this.
    pub a_min_stop: f64,
    /// Hard cap on flow time.
    pub t_max: f64,
    /// Keep a full state every this many steps (0 keeps only the first
    /// and last).
    pub snapshot_stride: usize,
    /// Record a summary sample every this many steps. Samples are always
    /// recorded once `a_min < 10 a_min_stop`.
    pub monitor_stride: usize,
    /// Use this step instead of the adaptive one.
    pub fixed_dt: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            cfl_safety: 0.2,
            a_min_stop: 1e-3,
            t_max: 100.0,
            snapshot_stride: 0,
            monitor_stride: 1,
            fixed_dt: None,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(FlowError::Config(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if !(self.a_min_stop > DEGENERATE_RADIUS && self.a_min_stop.is_finite()) {
            return Err(FlowError::Config(format!(
                "a_min_stop must exceed {DEGENERATE_RADIUS:e}, got {}",
                self.a_min_stop
            )));
        }
        if !(self.t_max > 0.0) {
            return Err(FlowError::Config(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        if self.monitor_stride == 0 {
            return Err(FlowError::Config("monitor_stride must be at least 1".into()));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(FlowError::Config(format!(
                    "fixed_dt must be positive, got {dt}"
                )));
            }
        }
        Ok(())
    }
}

/// Pointwise time derivatives of the evolved variables.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRates {
    pub da_dt: ScalarField,
    pub db_dt: ScalarField,
    pub dc_dt: ScalarField,
    pub dlogphi_dt: ScalarField,
}

/// Raw right-hand side `[dlogphi, da, db, dc]` without validation.
fn rates_raw(grid: PeriodicGrid, phi: &[f64], a: &[f64], b: &[f64], c: &[f64]) -> [Vec<f64>; 4] {
    let d = RadiusDerivatives::from_slices(grid, phi, a, b, c);
    let n = a.len();
    let mut out: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    for k in 0..n {
        let (a, b, c) = (a[k], b[k], c[k]);
        let (a2, b2, c2) = (a * a, b * b, c * c);
        let q = a2 * b2 * c2;
        let (ap, bp, cp) = (d.ap[k], d.bp[k], d.cp[k]);
        let (app, bpp, cpp) = (d.app[k], d.bpp[k], d.cpp[k]);
        out[0][k] = app / a + bpp / b + cpp / c;
        out[1][k] = app + ap * (bp / b + cp / c) - 2.0 * a * (a2 * a2 - (b2 - c2).powi(2)) / q;
        out[2][k] = bpp + bp * (ap / a + cp / c) - 2.0 * b * (b2 * b2 - (a2 - c2).powi(2)) / q;
        out[3][k] = cpp + cp * (ap / a + bp / b) - 2.0 * c * (c2 * c2 - (a2 - b2).powi(2)) / q;
    }
    out
}

fn check_state(state: &MetricState) -> Result<()> {
    check_finite("phi", state.phi().values())?;
    check_positive_phi(state.phi().values())?;
    crate::curvature::check_fibers(state.a().values(), state.b().values(), state.c().values())
}

/// Right-hand side of the flow system at `state`.
pub fn time_derivatives(state: &MetricState) -> Result<FlowRates> {
    check_state(state)?;
    let grid = state.grid();
    let [dl, da, db, dc] = rates_raw(
        grid,
        state.phi().values(),
        state.a().values(),
        state.b().values(),
        state.c().values(),
    );
    for (name, v) in [("dlogphi_dt", &dl), ("da_dt", &da), ("db_dt", &db), ("dc_dt", &dc)] {
        check_finite(name, v)?;
    }
    Ok(FlowRates {
        da_dt: ScalarField::from_vec_unchecked(grid, da),
        db_dt: ScalarField::from_vec_unchecked(grid, db),
        dc_dt: ScalarField::from_vec_unchecked(grid, dc),
        dlogphi_dt: ScalarField::from_vec_unchecked(grid, dl),
    })
}

/// Builds the stage state `base + h * k`, with `phi` scaled by `exp(h k)`.
fn stage(base: &MetricState, h: f64, k: &FlowRates) -> Result<MetricState> {
    let grid = base.grid();
    let step = |f: &ScalarField, d: &ScalarField| -> Vec<f64> {
        f.values()
            .iter()
            .zip(d.values())
            .map(|(v, r)| v + h * r)
            .collect()
    };
    let phi: Vec<f64> = base
        .phi()
        .values()
        .iter()
        .zip(k.dlogphi_dt.values())
        .map(|(p, r)| p * (h * r).exp())
        .collect();
    assemble_state(
        grid,
        base.t + h,
        phi,
        step(base.a(), &k.da_dt),
        step(base.b(), &k.db_dt),
        step(base.c(), &k.dc_dt),
    )
}

/// Validates a candidate state, reporting failures as a rejected step.
fn assemble_state(
    grid: PeriodicGrid,
    t: f64,
    phi: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
) -> Result<MetricState> {
    for (name, v) in [("phi", &phi), ("a", &a), ("b", &b), ("c", &c)] {
        if let Some(index) = v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(FlowError::StepRejected { field: name, index });
        }
    }
    let f = |v| ScalarField::from_vec_unchecked(grid, v);
    MetricState::new(t, f(phi), f(a), f(b), f(c))
}

/// One classical RK4 step of size `dt` using the given right-hand side.
pub fn rk4_step_with<F>(state: &MetricState, dt: f64, rhs: F) -> Result<MetricState>
where
    F: Fn(&MetricState) -> Result<FlowRates>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(FlowError::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let reject = |e: FlowError| match e {
        FlowError::NonFinite { field, index } => FlowError::StepRejected { field, index },
        FlowError::DegenerateFiber { field, index, .. } => FlowError::StepRejected { field, index },
        FlowError::GaugeDegenerate { index, .. } => FlowError::StepRejected { field: "phi", index },
        other => other,
    };
    let k1 = rhs(state)?;
    let s2 = stage(state, 0.5 * dt, &k1)?;
    let k2 = rhs(&s2).map_err(reject)?;
    let s3 = stage(state, 0.5 * dt, &k2)?;
    let k3 = rhs(&s3).map_err(reject)?;
    let s4 = stage(state, dt, &k3)?;
    let k4 = rhs(&s4).map_err(reject)?;

    let combine = |f: fn(&FlowRates) -> &ScalarField| -> Vec<f64> {
        let (r1, r2, r3, r4) = (f(&k1).values(), f(&k2).values(), f(&k3).values(), f(&k4).values());
        (0..r1.len())
            .map(|i| dt / 6.0 * (r1[i] + 2.0 * r2[i] + 2.0 * r3[i] + r4[i]))
            .collect()
    };
    let dl = combine(|r| &r.dlogphi_dt);
    let da = combine(|r| &r.da_dt);
    let db = combine(|r| &r.db_dt);
    let dc = combine(|r| &r.dc_dt);
    let add = |f: &ScalarField, d: Vec<f64>| -> Vec<f64> {
        f.values().iter().zip(d).map(|(v, x)| v + x).collect()
    };
    let phi = state
        .phi()
        .values()
        .iter()
        .zip(dl)
        .map(|(p, x)| p * x.exp())
        .collect();
    assemble_state(
        state.grid(),
        state.t + dt,
        phi,
        add(state.a(), da),
        add(state.b(), db),
        add(state.c(), dc),
    )
}

/// One classical RK4 step of the flow system.
pub fn rk4_step(state: &MetricState, dt: f64) -> Result<MetricState> {
    rk4_step_with(state, dt, time_derivatives)
}

/// `cfl_safety * min((min phi * dz)^2, r^2 / 8)` where `r` is the smallest
/// fiber radius (equal to the minimum of `a` on ordered data).
pub fn adaptive_dt(state: &MetricState, cfg: &FlowConfig) -> f64 {
    let dz = state.grid().dz();
    let phi_min = extremum_slice(state.phi().values(), ExtremumKind::Min).0;
    let r_min = [state.a(), state.b(), state.c()]
        .iter()
        .map(|f| extremum_slice(f.values(), ExtremumKind::Min).0)
        .fold(f64::INFINITY, f64::min);
    let diffusion = (phi_min * dz).powi(2);
    let reaction = r_min * r_min / 8.0;
    cfg.cfl_safety * diffusion.min(reaction)
}

/// Summary scalars of one state along a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    /// Step that produced this state (0 for the initial state).
    pub dt: f64,
    pub a_min: f64,
    pub a_min_idx: usize,
    pub b_min: f64,
    pub c_max: f64,
    pub c_max_idx: usize,
    /// `max_z c/a`.
    pub ratio_max: f64,
    pub ratio_max_idx: usize,
    /// `max_z |b - c| / min(b, c)`.
    pub ecc_bc: f64,
    /// `max_z |a - c| / min(a, c)`.
    pub ecc_ac: f64,
    /// `min_z min(b - a, c - b)`.
    pub order_margin: f64,
    pub order_margin_idx: usize,
    pub s_min: f64,
    pub s_min_idx: usize,
    /// `max_z |Rm|`.
    pub rm_max: f64,
    pub rm_max_idx: usize,
    /// `sup_z |a'|` and analogues, arclength derivatives.
    pub ap_sup: f64,
    pub bp_sup: f64,
    pub cp_sup: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

fn max_with_idx(v: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (k, x) in v.enumerate() {
        if x > best.0 {
            best = (x, k);
        }
    }
    best
}

impl Sample {
    /// Summarises `state`. Fails on degenerate fibers.
    pub fn of(state: &MetricState, dt: f64) -> Result<Self> {
        check_state(state)?;
        let (a, b, c) = (state.a().values(), state.b().values(), state.c().values());
        let phi = state.phi().values();
        let d = RadiusDerivatives::of(state);
        let curv = assemble(state, &d);
        let (a_min, a_min_idx) = extremum_slice(a, ExtremumKind::Min);
        let (b_min, _) = extremum_slice(b, ExtremumKind::Min);
        let (c_max, c_max_idx) = extremum_slice(c, ExtremumKind::Max);
        let n = a.len();
        let (ratio_max, ratio_max_idx) = max_with_idx((0..n).map(|k| c[k] / a[k]));
        let (ecc_bc, _) = max_with_idx((0..n).map(|k| (b[k] - c[k]).abs() / b[k].min(c[k])));
        let (ecc_ac, _) = max_with_idx((0..n).map(|k| (a[k] - c[k]).abs() / a[k].min(c[k])));
        let (order_margin, order_margin_idx) = state.ordering_margin();
        let (s_min, s_min_idx) = extremum_slice(curv.scal.values(), ExtremumKind::Min);
        let (rm_max, rm_max_idx) = max_with_idx(curv.rm_norm_sq.values().iter().map(|v| v.sqrt()));
        let sup = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        Ok(Self {
            t: state.t,
            dt,
            a_min,
            a_min_idx,
            b_min,
            c_max,
            c_max_idx,
            ratio_max,
            ratio_max_idx,
            ecc_bc,
            ecc_ac,
            order_margin,
            order_margin_idx,
            s_min,
            s_min_idx,
            rm_max,
            rm_max_idx,
            ap_sup: sup(&d.ap),
            bp_sup: sup(&d.bp),
            cp_sup: sup(&d.cp),
            phi_min: extremum_slice(phi, ExtremumKind::Min).0,
            phi_max: extremum_slice(phi, ExtremumKind::Max).0,
        })
    }

    fn is_finite(&self) -> bool {
        [
            self.a_min,
            self.b_min,
            self.c_max,
            self.ratio_max,
            self.ecc_bc,
            self.ecc_ac,
            self.s_min,
            self.rm_max,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    AMinReached,
    TMaxReached,
    NonfiniteDetected,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::AMinReached => "a_min_reached",
            StopReason::TMaxReached => "t_max_reached",
            StopReason::NonfiniteDetected => "nonfinite_detected",
        }
    }
}

/// A completed run. The first snapshot is the initial state and the last
/// is the final good state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: PeriodicGrid,
    pub a_min_stop: f64,
    pub samples: Vec<Sample>,
    pub snapshots: Vec<MetricState>,
    pub stop_reason: StopReason,
    pub steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn initial_sample(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn final_sample(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn final_state(&self) -> Option<&MetricState> {
        self.snapshots.last()
    }

    /// Average step over the run.
    pub fn dt_mean(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(f), Some(l)) if self.steps > 0 => (l.t - f.t) / self.steps as f64,
            _ => 0.0,
        }
    }

    /// Indices of the trailing samples with `a_min` within one decade of the
    /// final value.
    pub fn last_decade(&self) -> std::ops::Range<usize> {
        let n = self.samples.len();
        let Some(last) = self.samples.last() else {
            return 0..0;
        };
        let ceiling = 10.0 * last.a_min;
        let mut lo = n;
        while lo > 0 && self.samples[lo - 1].a_min <= ceiling {
            lo -= 1;
        }
        lo..n
    }
}

/// Extrapolated singular time from a linear fit of `a_min^2` against `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub t_estimate: f64,
    pub fit_window: (f64, f64),
    /// Root-mean-square residual of the fit, in units of `a_min^2`.
    pub fit_residual: f64,
    pub fit_slope: f64,
    pub samples_used: usize,
    pub a_min_final: f64,
}

/// Minimum number of samples in the fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares fit of `a_min^2` over the last decade of `a_min`; the
/// singular time is the root of the fitted line.
pub fn estimate_singular_time(traj: &Trajectory) -> Result<SingularityReport> {
    let window = &traj.samples[traj.last_decade()];
    if window.len() < MIN_FIT_SAMPLES {
        return Err(FlowError::InsufficientSamples {
            needed: MIN_FIT_SAMPLES,
            found: window.len(),
        });
    }
    let m = window.len() as f64;
    let t_bar = window.iter().map(|s| s.t).sum::<f64>() / m;
    let y_bar = window.iter().map(|s| s.a_min * s.a_min).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for s in window {
        let dx = s.t - t_bar;
        sxy += dx * (s.a_min * s.a_min - y_bar);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        return Err(FlowError::NoSingularity("fit window has zero time span".into()));
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(FlowError::NoSingularity(format!(
            "a_min^2 is not decreasing over the fit window (slope {slope})"
        )));
    }
    let ss: f64 = window
        .iter()
        .map(|s| (s.a_min * s.a_min - (y_bar + slope * (s.t - t_bar))).powi(2))
        .sum();
    let first = &window[0];
    let last = &window[window.len() - 1];
    Ok(SingularityReport {
        t_estimate: t_bar - y_bar / slope,
        fit_window: (first.t, last.t),
        fit_residual: (ss / m).sqrt(),
        fit_slope: slope,
        samples_used: window.len(),
        a_min_final: last.a_min,
    })
}

/// Step-size halvings tried before a run is declared nonfinite.
pub const MAX_REJECTIONS: usize = 20;

/// Evolves `initial` until `a_min < a_min_stop`, `t >= t_max`, or a step
/// fails after repeated halving. The singularity report is produced only
/// when the run reached `a_min_stop`.
pub fn evolve(
    initial: &MetricState,
    cfg: &FlowConfig,
) -> Result<(Trajectory, Option<SingularityReport>)> {
    cfg.validate()?;
    check_state(initial)?;
    let mut state = initial.clone();
    let mut traj = Trajectory {
        grid: initial.grid(),
        a_min_stop: cfg.a_min_stop,
        samples: vec![Sample::of(&state, 0.0)?],
        snapshots: vec![state.clone()],
        stop_reason: StopReason::TMaxReached,
        steps: 0,
        rejected_steps: 0,
    };
    let t_end = initial.t + cfg.t_max;
    let decade = 10.0 * cfg.a_min_stop;

    loop {
        let a_min = traj.samples.last().map(|s| s.a_min).unwrap_or(f64::INFINITY);
        if a_min < cfg.a_min_stop {
            traj.stop_reason = StopReason::AMinReached;
            break;
        }
        if state.t >= t_end {
            traj.stop_reason = StopReason::TMaxReached;
            break;
        }
        let mut dt = cfg.fixed_dt.unwrap_or_else(|| adaptive_dt(&state, cfg));
        if state.t + dt >= t_end {
            dt = t_end - state.t;
        }
        let mut next = None;
        for _ in 0..=MAX_REJECTIONS {
            match rk4_step(&state, dt).and_then(|s| Sample::of(&s, dt).map(|m| (s, m))) {
                Ok((s, m)) if m.is_finite() => {
                    next = Some((s, m));
                    break;
                }
                Ok(_)
                | Err(FlowError::StepRejected { .. })
                | Err(FlowError::NonFinite { .. })
                | Err(FlowError::DegenerateFiber { .. })
                | Err(FlowError::GaugeDegenerate { .. }) => {
                    traj.rejected_steps += 1;
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        let Some((mut s, sample)) = next else {
            traj.stop_reason = StopReason::NonfiniteDetected;
            break;
        };
        if dt == t_end - state.t {
            s.t = t_end;
        }
        state = s;
        traj.steps += 1;
        let stopping = sample.a_min < cfg.a_min_stop || state.t >= t_end;
        if traj.steps % cfg.monitor_stride == 0 || sample.a_min < decade || stopping {
            let mut sample = sample;
            sample.t = state.t;
            traj.samples.push(sample);
        }
        if cfg.snapshot_stride > 0 && traj.steps % cfg.snapshot_stride == 0 {
            traj.snapshots.push(state.clone());
        }
    }
    if traj.snapshots.last() != Some(&state) {
        traj.snapshots.push(state);
    }
    let report = match traj.stop_reason {
        StopReason::AMinReached => estimate_singular_time(&traj).ok(),
        _ => None,
    };
    Ok((traj, report))
}
