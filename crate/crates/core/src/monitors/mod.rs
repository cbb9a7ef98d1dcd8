//! Runtime checks of the flow's a-priori bounds along a [`Trajectory`].
//!
//! Every monitor is a pure function of the trajectory. A report passes when
//! its worst signed margin is at least `-tol`, where
//! `tol = kappa * (dz^order + dt_mean)` shrinks under refinement.

mod residual;

pub use residual::{k0_evolution_rhs, k0_residual, ResidualSample, K0};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::flow::{rk4_step, SingularityReport, Trajectory};
use crate::grid::MetricState;

/// Tolerance policy shared by all monitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub kappa: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { kappa: 10.0 }
    }
}

impl Tolerance {
    pub fn new(kappa: f64) -> Self {
        Self { kappa }
    }

    /// `kappa * (dz^order + dt_mean)` for this run.
    pub fn for_trajectory(&self, traj: &Trajectory) -> f64 {
        let g = traj.grid;
        // plain products: powi may round differently where it is const-folded
        let dz = g.dz();
        let dz_p = (0..g.order().order()).fold(1.0, |p, _| p * dz);
        self.kappa * (dz_p + traj.dt_mean())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorStatus {
    Passed,
    Violated,
    /// The hypotheses of the bound do not hold for this run; nothing is
    /// asserted.
    NotApplicable,
}

/// Where a margin was attained. `index` is the z-index, when meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub t: f64,
    pub index: Option<usize>,
}

/// One asserted inequality inside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub worst_margin: f64,
    pub worst_location: Location,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub name: String,
    pub status: MonitorStatus,
    /// False only when the status is `Violated`.
    pub passed: bool,
    /// Smallest margin over all checks; negative means the bound was
    /// crossed by that much.
    pub worst_margin: Option<f64>,
    pub worst_location: Option<Location>,
    pub tolerance: f64,
    /// Evidence-only reports are not theorems and never fail a strict run.
    pub evidence_only: bool,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl MonitorReport {
    fn from_checks(name: &str, tol: f64, checks: Vec<Check>, notes: Vec<String>) -> Self {
        let worst = checks
            .iter()
            .min_by(|a, b| a.worst_margin.total_cmp(&b.worst_margin));
        let passed = worst.map_or(true, |c| c.worst_margin >= -tol);
        Self {
            name: name.to_string(),
            status: if passed {
                MonitorStatus::Passed
            } else {
                MonitorStatus::Violated
            },
            passed,
            worst_margin: worst.map(|c| c.worst_margin),
            worst_location: worst.map(|c| c.worst_location),
            tolerance: tol,
            evidence_only: false,
            checks,
            notes,
        }
    }

    fn not_applicable(name: &str, tol: f64, reason: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            status: MonitorStatus::NotApplicable,
            passed: true,
            worst_margin: None,
            worst_location: None,
            tolerance: tol,
            evidence_only: false,
            checks: vec![],
            notes: vec![reason.into()],
        }
    }

    fn evidence(mut self) -> Self {
        self.evidence_only = true;
        self
    }

    /// True when this report should fail a strict run.
    pub fn is_hard_violation(&self) -> bool {
        self.status == MonitorStatus::Violated && !self.evidence_only
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Minimum of a margin series with its location.
fn worst(name: &str, tol: f64, it: impl Iterator<Item = (f64, Location)>) -> Option<Check> {
    let mut best: Option<(f64, Location)> = None;
    for (m, loc) in it {
        // NaN margins count as the worst possible
        let m = if m.is_nan() { f64::NEG_INFINITY } else { m };
        if best.map_or(true, |(b, _)| m < b) {
            best = Some((m, loc));
        }
    }
    best.map(|(m, loc)| Check {
        name: name.to_string(),
        passed: m >= -tol,
        worst_margin: m,
        worst_location: loc,
    })
}

fn at(t: f64, index: usize) -> Location {
    Location {
        t,
        index: Some(index),
    }
}

fn at_t(t: f64) -> Location {
    Location { t, index: None }
}

/// Explicit constants of the lower-bound and derivative-bound arguments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub lambda: f64,
    pub lambda0: f64,
    pub d_lower: f64,
    pub frak_c: f64,
    pub deriv_bounds: [f64; 3],
}

/// `(280 sqrt 3 / 9, 4 sqrt 57 / 3, 10 sqrt 93 / 9)`.
pub fn derivative_bound_constants() -> [f64; 3] {
    [
        280.0 * 3f64.sqrt() / 9.0,
        4.0 * 57f64.sqrt() / 3.0,
        10.0 * 93f64.sqrt() / 9.0,
    ]
}

/// Constants for `lambda = max c0/a0`. For `lambda >= 2` the lower-bound
/// constants are still evaluated but are not positive.
pub fn constants(lambda: f64) -> Result<TheoremConstants> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(FlowError::InvalidArgument(format!(
            "lambda must be at least 1, got {lambda}"
        )));
    }
    let l2 = lambda * lambda;
    let lambda0 = (4.0 * l2 - l2 * l2).min(3.0);
    Ok(TheoremConstants {
        lambda,
        lambda0,
        d_lower: 2.0 / 3.0 * lambda0 / lambda.powf(14.0 / 3.0),
        frak_c: (16.0 / 3.0 + 4.0 * l2).sqrt(),
        deriv_bounds: derivative_bound_constants(),
    })
}

/// Constants for the initial data of a run.
pub fn trajectory_constants(traj: &Trajectory) -> Result<TheoremConstants> {
    let s0 = initial(traj)?;
    constants(s0.ratio_max.max(1.0))
}

fn initial(traj: &Trajectory) -> Result<&crate::flow::Sample> {
    traj.samples.first().ok_or(FlowError::InsufficientSamples {
        needed: 1,
        found: 0,
    })
}

fn is_ordered_initially(traj: &Trajectory) -> bool {
    traj.samples.first().is_some_and(|s| s.order_margin >= 0.0)
}

/// Pointwise ordering `a <= b <= c` along the run.
pub fn ordering_monitor(traj: &Trajectory, tol: f64) -> MonitorReport {
    const NAME: &str = "ordering";
    if !is_ordered_initially(traj) {
        return MonitorReport::not_applicable(NAME, tol, "precondition violated: initial data not ordered");
    }
    let check = worst(
        "min(b - a, c - b)",
        tol,
        traj.samples
            .iter()
            .map(|s| (s.order_margin, at(s.t, s.order_margin_idx))),
    );
    MonitorReport::from_checks(NAME, tol, check.into_iter().collect(), vec![])
}

/// Margins `min_{j<k} e_j - e_k` of a series that should not increase.
fn nonincreasing(
    name: &str,
    tol: f64,
    traj: &Trajectory,
    f: impl Fn(&crate::flow::Sample) -> f64,
) -> Option<Check> {
    let mut prior = f64::INFINITY;
    let margins = traj.samples.iter().map(|s| {
        let e = f(s);
        let m = if prior.is_finite() { prior - e } else { f64::INFINITY };
        prior = prior.min(e);
        (m, at_t(s.t))
    });
    let collected: Vec<_> = margins.collect();
    worst(name, tol, collected.into_iter())
}

/// The fiber eccentricities `sup |b-c|/min(b,c)` and `sup |a-c|/min(a,c)`
/// do not exceed any earlier value.
pub fn eccentricity_monitor(traj: &Trajectory, tol: f64) -> MonitorReport {
    const NAME: &str = "eccentricity";
    if !is_ordered_initially(traj) {
        return MonitorReport::not_applicable(NAME, tol, "precondition violated: initial data not ordered");
    }
    let checks = [
        nonincreasing("sup |b-c|/min(b,c) nonincreasing", tol, traj, |s| s.ecc_bc),
        nonincreasing("sup |a-c|/min(a,c) nonincreasing", tol, traj, |s| s.ecc_ac),
    ];
    MonitorReport::from_checks(NAME, tol, checks.into_iter().flatten().collect(), vec![])
}

/// `max c/a <= lambda` and the refined time-dependent bound on `(c/a)^2`.
pub fn ratio_monitor(traj: &Trajectory, tol: f64) -> MonitorReport {
    const NAME: &str = "ratio";
    if !is_ordered_initially(traj) {
        return MonitorReport::not_applicable(NAME, tol, "precondition violated: initial data not ordered");
    }
    let s0 = &traj.samples[0];
    let lambda = s0.ratio_max;
    let c0sq = s0.c_max * s0.c_max;
    let l2 = lambda * lambda;
    let plain = worst(
        "max c/a <= lambda",
        tol,
        traj.samples
            .iter()
            .map(|s| (lambda - s.ratio_max, at(s.t, s.ratio_max_idx))),
    );
    let refined = worst(
        "(c/a)^2 <= e^(l^2-1)(l^2-1)(1-4t/c0^2)^2 + 1",
        tol,
        traj.samples.iter().map(|s| {
            let rhs = (l2 - 1.0).exp() * (l2 - 1.0) * (1.0 - 4.0 * s.t / c0sq).powi(2) + 1.0;
            (rhs - s.ratio_max * s.ratio_max, at(s.t, s.ratio_max_idx))
        }),
    );
    let mut notes = vec![format!("lambda = {lambda}")];
    if lambda >= 2.0 {
        notes.push("lambda >= 2: refined bound is far from sharp".into());
    }
    MonitorReport::from_checks(NAME, tol, [plain, refined].into_iter().flatten().collect(), notes)
}

/// Per-sample forward differences `(t_mid, d(f)/dt)`.
fn rates<'a>(
    traj: &'a Trajectory,
    f: impl Fn(&crate::flow::Sample) -> f64 + 'a,
) -> impl Iterator<Item = (f64, f64)> + 'a {
    traj.samples.windows(2).filter_map(move |w| {
        let dt = w[1].t - w[0].t;
        (dt > 0.0).then(|| (w[1].t, (f(&w[1]) - f(&w[0])) / dt))
    })
}

/// `a_min^2 <= 4(T - t)`, its rate form `d(a_min^2)/dt >= -4`, and, when
/// `lambda < 2` and `min S0 >= 0`, `a_min^2 >= D (T - t)`.
pub fn amin_bound_monitor(
    traj: &Trajectory,
    report: Option<&SingularityReport>,
    tol: f64,
) -> MonitorReport {
    const NAME: &str = "amin_bound";
    let Some(rep) = report else {
        return MonitorReport::not_applicable(NAME, tol, "no singularity detected");
    };
    let big_t = rep.t_estimate;
    let live = || traj.samples.iter().filter(move |s| s.t < big_t);
    let mut checks: Vec<Check> = vec![];
    checks.extend(worst(
        "a_min^2 <= 4(T - t)",
        tol,
        live().map(|s| (4.0 * (big_t - s.t) - s.a_min * s.a_min, at(s.t, s.a_min_idx))),
    ));
    checks.extend(worst(
        "d(a_min^2)/dt >= -4",
        tol,
        rates(traj, |s| s.a_min * s.a_min).map(|(t, r)| (r + 4.0, at_t(t))),
    ));
    let mut notes = vec![format!("T = {big_t}")];
    let s0 = &traj.samples[0];
    match trajectory_constants(traj) {
        Ok(k) if k.lambda < 2.0 && s0.s_min >= 0.0 => {
            checks.extend(worst(
                "a_min^2 >= D (T - t)",
                tol,
                live().map(|s| (s.a_min * s.a_min - k.d_lower * (big_t - s.t), at(s.t, s.a_min_idx))),
            ));
            notes.push(format!("D = {}", k.d_lower));
        }
        Ok(k) => notes.push(format!(
            "lower bound not asserted (lambda = {}, min S0 = {})",
            k.lambda, s0.s_min
        )),
        Err(e) => notes.push(format!("lower bound not asserted: {e}")),
    }
    MonitorReport::from_checks(NAME, tol, checks, notes)
}

/// `c_max^2 <= c_max(0)^2 - 4t` and `d(c_max^2)/dt <= -4`.
pub fn cmax_bound_monitor(traj: &Trajectory, tol: f64) -> MonitorReport {
    const NAME: &str = "cmax_bound";
    if !is_ordered_initially(traj) {
        return MonitorReport::not_applicable(NAME, tol, "precondition violated: initial data not ordered");
    }
    let s0 = &traj.samples[0];
    let c0sq = s0.c_max * s0.c_max;
    let t0 = s0.t;
    let checks = [
        worst(
            "c_max^2 <= c_max(0)^2 - 4t",
            tol,
            traj.samples
                .iter()
                .map(|s| (c0sq - 4.0 * (s.t - t0) - s.c_max * s.c_max, at(s.t, s.c_max_idx))),
        ),
        worst(
            "d(c_max^2)/dt <= -4",
            tol,
            rates(traj, |s| s.c_max * s.c_max).map(|(t, r)| (-4.0 - r, at_t(t))),
        ),
    ];
    MonitorReport::from_checks(NAME, tol, checks.into_iter().flatten().collect(), vec![])
}

/// `a_min(0)^2/4 <= T <= c_max(0)^2/4` for the estimated singular time.
pub fn stop_time_monitor(
    traj: &Trajectory,
    report: Option<&SingularityReport>,
    tol: f64,
) -> MonitorReport {
    const NAME: &str = "stop_time";
    let Some(rep) = report else {
        return MonitorReport::not_applicable(NAME, tol, "no singularity detected");
    };
    let s0 = &traj.samples[0];
    let big_t = rep.t_estimate - s0.t;
    let mut checks = vec![Check {
        name: "T >= a_min(0)^2/4".into(),
        passed: false,
        worst_margin: big_t - s0.a_min * s0.a_min / 4.0,
        worst_location: at_t(rep.t_estimate),
    }];
    let mut notes = vec![format!("T = {}", rep.t_estimate)];
    if is_ordered_initially(traj) {
        checks.push(Check {
            name: "T <= c_max(0)^2/4".into(),
            passed: false,
            worst_margin: s0.c_max * s0.c_max / 4.0 - big_t,
            worst_location: at_t(rep.t_estimate),
        });
    } else {
        notes.push("upper bound needs ordered data; not asserted".into());
    }
    for c in &mut checks {
        c.passed = c.worst_margin >= -tol;
    }
    MonitorReport::from_checks(NAME, tol, checks, notes)
}

/// Arclength derivative bounds, asserted for ordered data with
/// `1 < lambda < 2`.
pub fn derivative_bound_monitor(traj: &Trajectory, tol: f64) -> MonitorReport {
    const NAME: &str = "derivative_bound";
    let k = match trajectory_constants(traj) {
        Ok(k) => k,
        Err(e) => return MonitorReport::not_applicable(NAME, tol, e.to_string()),
    };
    if !is_ordered_initially(traj) || !(k.lambda < 2.0) {
        return MonitorReport::not_applicable(
            NAME,
            tol,
            format!("precondition violated: needs ordered data with lambda < 2 (lambda = {})", k.lambda),
        );
    }
    let s0 = &traj.samples[0];
    let [c1, c2, c3] = k.deriv_bounds;
    let (ba, bb, bc) = (c1.max(s0.ap_sup), c2.max(s0.bp_sup), c3.max(s0.cp_sup));
    let checks = [
        worst("sup|a'| bound", tol, traj.samples.iter().map(|s| (ba - s.ap_sup, at_t(s.t)))),
        worst("sup|b'| bound", tol, traj.samples.iter().map(|s| (bb - s.bp_sup, at_t(s.t)))),
        worst("sup|c'| bound", tol, traj.samples.iter().map(|s| (bc - s.cp_sup, at_t(s.t)))),
    ];
    MonitorReport::from_checks(NAME, tol, checks.into_iter().flatten().collect(), vec![])
}

/// `min S >= 0` for all time when it holds initially.
pub fn scalar_min_monitor(traj: &Trajectory, tol: f64) -> MonitorReport {
    const NAME: &str = "scalar_min";
    let Some(s0) = traj.samples.first() else {
        return MonitorReport::not_applicable(NAME, tol, "empty trajectory");
    };
    if !(s0.s_min >= 0.0) {
        return MonitorReport::not_applicable(
            NAME,
            tol,
            format!("precondition violated: min S(0) = {} < 0", s0.s_min),
        );
    }
    let check = worst(
        "min S >= 0",
        tol,
        traj.samples.iter().map(|s| (s.s_min, at(s.t, s.s_min_idx))),
    );
    MonitorReport::from_checks(NAME, tol, check.into_iter().collect(), vec![])
}

/// Minimum number of samples for the concavity check.
pub const CONCAVITY_MIN_SAMPLES: usize = 20;
const CONCAVITY_POINTS: usize = 200;

/// Second differences of `a_min^2`, linearly resampled on a uniform time
/// grid, are at most `tol`. Evidence only.
pub fn concavity_check(traj: &Trajectory, tol: f64) -> MonitorReport {
    const NAME: &str = "concavity";
    let n = traj.samples.len();
    if n < CONCAVITY_MIN_SAMPLES {
        return MonitorReport::not_applicable(
            NAME,
            tol,
            format!("needs at least {CONCAVITY_MIN_SAMPLES} samples, have {n}"),
        )
        .evidence();
    }
    let ts: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let ys: Vec<f64> = traj.samples.iter().map(|s| s.a_min * s.a_min).collect();
    let m = CONCAVITY_POINTS.min(n);
    let (t0, t1) = (ts[0], ts[n - 1]);
    let h = (t1 - t0) / (m - 1) as f64;
    let mut j = 0;
    let grid: Vec<f64> = (0..m)
        .map(|i| {
            let t = if i == m - 1 { t1 } else { t0 + h * i as f64 };
            while j + 2 < n && ts[j + 1] < t {
                j += 1;
            }
            let w = ((t - ts[j]) / (ts[j + 1] - ts[j])).clamp(0.0, 1.0);
            ys[j] + w * (ys[j + 1] - ys[j])
        })
        .collect();
    let check = worst(
        "d2(a_min^2)/dt2 <= 0",
        tol,
        (1..m - 1).map(|i| {
            let d2 = (grid[i + 1] - 2.0 * grid[i] + grid[i - 1]) / (h * h);
            (-d2, at_t(t0 + h * i as f64))
        }),
    );
    MonitorReport::from_checks(
        NAME,
        tol,
        check.into_iter().collect(),
        vec![format!("resampled on {m} uniform points")],
    )
    .evidence()
}

/// Residual of the `K0i` evolution equation on three consecutive states,
/// relative to `max(1, max|rhs|)`.
pub fn evolution_residual(
    states: [&MetricState; 3],
    which: K0,
    tol: f64,
) -> Result<MonitorReport> {
    let r = k0_residual(states[0], states[1], states[2], which)?;
    let rel = r.residual / r.rhs_max.max(1.0);
    let check = Check {
        name: format!("|d{0}/dt - rhs({0})| / max(1, max|rhs|)", which.name()),
        passed: -rel >= -tol,
        worst_margin: -rel,
        worst_location: at(r.t, r.residual_index),
    };
    Ok(MonitorReport::from_checks(
        &format!("evolution_residual_{}", which.name()),
        tol,
        vec![check],
        vec![format!("residual = {}, max |rhs| = {}", r.residual, r.rhs_max)],
    ))
}

/// [`evolution_residual`] at the start of a run, from two probe steps of
/// `h = 0.01 (min phi dz)^2` off the initial snapshot. The probe step keeps
/// the time-differencing error at the order of the spatial one.
pub fn initial_evolution_residual(traj: &Trajectory, which: K0, tol: f64) -> Result<MonitorReport> {
    let s0 = traj.snapshots.first().ok_or(FlowError::InsufficientSamples {
        needed: 1,
        found: 0,
    })?;
    let phi_min = s0.phi().values().iter().cloned().fold(f64::INFINITY, f64::min);
    let h = 0.01 * (phi_min * s0.grid().dz()).powi(2);
    let s1 = rk4_step(s0, h)?;
    let s2 = rk4_step(&s1, h)?;
    evolution_residual([s0, &s1, &s2], which, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    TypeI,
    Inconclusive,
}

/// Limits for the Type I classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeIConfig {
    /// Largest accepted `|slope|` of `log((T-t)|Rm|)` against `log(T-t)`
    /// over the final decade.
    pub max_slope: f64,
    /// Relative slack on the band limits `[sqrt(D), 2]`.
    pub band_slack: f64,
}

impl Default for TypeIConfig {
    fn default() -> Self {
        Self {
            max_slope: 0.1,
            band_slack: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeIReport {
    /// Sup over samples of `(T - t) max|Rm|`.
    pub sup_tml_rm: f64,
    /// Range of `a_min / sqrt(T - t)` over the final decade.
    pub ratio_band: (f64, f64),
    /// Accepted interval for the band.
    pub band_limits: (f64, f64),
    /// Log-log slope of `(T - t) max|Rm|` against `T - t` over the final
    /// decade; zero for a Type I rate.
    pub slope: f64,
    pub samples_used: usize,
    pub classification: Classification,
}

/// Classifies the singularity from the curvature and `a_min` rates over the
/// final decade of `a_min`.
pub fn type1_classifier(
    traj: &Trajectory,
    report: &SingularityReport,
    cfg: &TypeIConfig,
) -> Result<TypeIReport> {
    let big_t = report.t_estimate;
    let sup_tml_rm = traj
        .samples
        .iter()
        .filter(|s| s.t < big_t)
        .map(|s| (big_t - s.t) * s.rm_max)
        .fold(f64::NEG_INFINITY, f64::max);
    let decade: Vec<_> = traj.samples[traj.last_decade()]
        .iter()
        .filter(|s| s.t < big_t)
        .collect();
    if decade.len() < 3 {
        return Err(FlowError::InsufficientSamples {
            needed: 3,
            found: decade.len(),
        });
    }
    let mut band = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut xs, mut ys) = (vec![], vec![]);
    for s in &decade {
        let tau = big_t - s.t;
        let r = s.a_min / tau.sqrt();
        band = (band.0.min(r), band.1.max(r));
        xs.push(tau.ln());
        ys.push((tau * s.rm_max).ln());
    }
    let slope = ls_slope(&xs, &ys);
    let d_lower = trajectory_constants(traj).map(|k| k.d_lower).unwrap_or(0.0);
    let band_limits = (
        d_lower.max(0.0).sqrt() * (1.0 - cfg.band_slack),
        2.0 * (1.0 + cfg.band_slack),
    );
    let type1 = sup_tml_rm.is_finite()
        && slope.abs() <= cfg.max_slope
        && band.0 > 0.0
        && band.0 >= band_limits.0
        && band.1 <= band_limits.1;
    Ok(TypeIReport {
        sup_tml_rm,
        ratio_band: band,
        band_limits,
        slope,
        samples_used: decade.len(),
        classification: if type1 {
            Classification::TypeI
        } else {
            Classification::Inconclusive
        },
    })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let xb = xs.iter().sum::<f64>() / m;
    let yb = ys.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - xb) * (y - yb);
        sxx += (x - xb) * (x - xb);
    }
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

/// Selectable monitors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorKind {
    Ordering,
    Eccentricity,
    Ratio,
    AminBound,
    CmaxBound,
    StopTime,
    DerivativeBound,
    ScalarMin,
    Concavity,
    EvolutionResidual,
}

impl MonitorKind {
    pub const ALL: [MonitorKind; 10] = [
        MonitorKind::Ordering,
        MonitorKind::Eccentricity,
        MonitorKind::Ratio,
        MonitorKind::AminBound,
        MonitorKind::CmaxBound,
        MonitorKind::StopTime,
        MonitorKind::DerivativeBound,
        MonitorKind::ScalarMin,
        MonitorKind::Concavity,
        MonitorKind::EvolutionResidual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MonitorKind::Ordering => "ordering",
            MonitorKind::Eccentricity => "eccentricity",
            MonitorKind::Ratio => "ratio",
            MonitorKind::AminBound => "amin_bound",
            MonitorKind::CmaxBound => "cmax_bound",
            MonitorKind::StopTime => "stop_time",
            MonitorKind::DerivativeBound => "derivative_bound",
            MonitorKind::ScalarMin => "scalar_min",
            MonitorKind::Concavity => "concavity",
            MonitorKind::EvolutionResidual => "evolution_residual",
        }
    }
}

impl fmt::Display for MonitorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MonitorKind {
    type Err = FlowError;

    fn from_str(s: &str) -> Result<Self> {
        MonitorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| FlowError::InvalidArgument(format!("unknown monitor '{s}'")))
    }
}

/// Runs the selected monitors. The evolution residual is taken at the start
/// of the run.
pub fn run_monitors(
    traj: &Trajectory,
    report: Option<&SingularityReport>,
    kinds: &[MonitorKind],
    tolerance: Tolerance,
) -> Vec<MonitorReport> {
    let tol = tolerance.for_trajectory(traj);
    kinds
        .iter()
        .map(|k| match k {
            MonitorKind::Ordering => ordering_monitor(traj, tol),
            MonitorKind::Eccentricity => eccentricity_monitor(traj, tol),
            MonitorKind::Ratio => ratio_monitor(traj, tol),
            MonitorKind::AminBound => amin_bound_monitor(traj, report, tol),
            MonitorKind::CmaxBound => cmax_bound_monitor(traj, tol),
            MonitorKind::StopTime => stop_time_monitor(traj, report, tol),
            MonitorKind::DerivativeBound => derivative_bound_monitor(traj, tol),
            MonitorKind::ScalarMin => scalar_min_monitor(traj, tol),
            MonitorKind::Concavity => concavity_check(traj, tol),
            MonitorKind::EvolutionResidual => initial_evolution_residual(traj, K0::K01, tol)
                .unwrap_or_else(|e| {
                    MonitorReport::not_applicable("evolution_residual_K01", tol, e.to_string())
                }),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{Sample, StopReason};
    use crate::grid::PeriodicGrid;
    use approx::assert_abs_diff_eq;

    fn traj(samples: Vec<Sample>) -> Trajectory {
        Trajectory {
            grid: PeriodicGrid::new(64).unwrap(),
            a_min_stop: 1e-3,
            samples,
            snapshots: vec![],
            stop_reason: StopReason::AMinReached,
            steps: 0,
            rejected_steps: 0,
        }
    }

    /// Exact shrinking sphere `r^2 = 4(1 - t)`, sampled down to `r = 1e-3`.
    fn sphere_series() -> Vec<Sample> {
        let taus: Vec<f64> = (0..300)
            .map(|i| (1e-7_f64.ln() * i as f64 / 299.0).exp())
            .collect();
        taus.into_iter()
            .map(|tau| {
                let r2 = 4.0 * tau;
                let r = r2.sqrt();
                Sample {
                    t: 1.0 - tau,
                    a_min: r,
                    b_min: r,
                    c_max: r,
                    ratio_max: 1.0,
                    s_min: 6.0 / r2,
                    rm_max: 6f64.sqrt() / r2,
                    ..Default::default()
                }
            })
            .collect()
    }

    fn sphere_report() -> SingularityReport {
        SingularityReport {
            t_estimate: 1.0,
            fit_window: (0.0, 1.0),
            fit_residual: 0.0,
            fit_slope: -4.0,
            samples_used: 100,
            a_min_final: 2e-3,
        }
    }

    #[test]
    fn constants_examples() {
        let k = constants(1.0).unwrap();
        assert_eq!(k.lambda0, 3.0);
        assert_abs_diff_eq!(k.d_lower, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.frak_c, (28.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_eq!(constants(1.5).unwrap().lambda0, 3.0);
        assert_abs_diff_eq!(constants(1.9).unwrap().lambda0, 1.4079, epsilon = 1e-12);
        assert!(constants(0.9).is_err());
        let [c1, c2, c3] = derivative_bound_constants();
        assert_abs_diff_eq!(c1, 53.886_025_1, epsilon = 1e-6);
        assert_abs_diff_eq!(c2, 10.066_445_7, epsilon = 1e-6);
        assert_abs_diff_eq!(c3, 10.715_167_5, epsilon = 1e-6);
    }

    #[test]
    fn sphere_bounds_are_tight() {
        let t = traj(sphere_series());
        let rep = sphere_report();
        // rates near T lose digits to cancellation
        let amin = amin_bound_monitor(&t, Some(&rep), 1e-6);
        assert!(amin.passed, "{amin:?}");
        assert!(amin.check("a_min^2 <= 4(T - t)").unwrap().worst_margin.abs() < 1e-12);
        // lambda = 1 and S > 0: the D = 2 lower bound applies and holds
        assert!(amin.check("a_min^2 >= D (T - t)").is_some());
        let cmax = cmax_bound_monitor(&t, 1e-6);
        assert!(cmax.passed, "{cmax:?}");
        assert!(cmax.worst_margin.unwrap().abs() < 1e-6);
        let ord = ordering_monitor(&t, 1e-9);
        assert_eq!(ord.worst_margin, Some(0.0));
        let ecc = eccentricity_monitor(&t, 1e-9);
        assert!(ecc.passed);
        let ratio = ratio_monitor(&t, 1e-9);
        assert!(ratio.passed);
        assert_eq!(ratio.worst_margin, Some(0.0));
    }

    #[test]
    fn sphere_is_type1_with_band_two() {
        let t = traj(sphere_series());
        let r = type1_classifier(&t, &sphere_report(), &TypeIConfig::default()).unwrap();
        assert_eq!(r.classification, Classification::TypeI);
        assert_abs_diff_eq!(r.ratio_band.0, 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(r.ratio_band.1, 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(r.sup_tml_rm, 6f64.sqrt() / 4.0, epsilon = 1e-8);
        assert!(r.slope.abs() < 1e-10);
    }

    #[test]
    fn type2_series_is_inconclusive() {
        let mut s = sphere_series();
        for x in &mut s {
            let tau = 1.0 - x.t;
            x.rm_max = tau.powf(-1.5);
        }
        let r = type1_classifier(&traj(s), &sphere_report(), &TypeIConfig::default()).unwrap();
        assert_eq!(r.classification, Classification::Inconclusive);
        assert_abs_diff_eq!(r.slope, -0.5, epsilon = 1e-9);
    }

    #[test]
    fn preconditions() {
        let mut s = sphere_series();
        s[0].order_margin = -0.1;
        let t = traj(s);
        assert_eq!(ordering_monitor(&t, 0.0).status, MonitorStatus::NotApplicable);
        let mut s = sphere_series();
        s[0].s_min = -1.0;
        assert_eq!(
            scalar_min_monitor(&traj(s), 0.0).status,
            MonitorStatus::NotApplicable
        );
        let mut s = sphere_series();
        s[0].ratio_max = 2.5;
        assert_eq!(
            derivative_bound_monitor(&traj(s), 0.0).status,
            MonitorStatus::NotApplicable
        );
        let t = traj(sphere_series());
        assert_eq!(
            amin_bound_monitor(&t, None, 0.0).status,
            MonitorStatus::NotApplicable
        );
    }

    #[test]
    fn refined_ratio_slack_at_start() {
        // lambda = 1.5: the refined bound at t = 0 is e^1.25 * 1.25 + 1
        let l2: f64 = 2.25;
        let rhs = (l2 - 1.0).exp() * (l2 - 1.0) + 1.0;
        assert_abs_diff_eq!(rhs, 5.363, epsilon = 1e-3);
        let mut s = sphere_series();
        for x in &mut s {
            x.ratio_max = 1.5;
            x.c_max = 10.0;
        }
        let t_last = s.last().unwrap().t;
        let r = ratio_monitor(&traj(s), 0.0);
        assert!(r.passed);
        // the bound tightens in time, so the worst margin is at the end
        let refined = &r.checks[1];
        let expect = (rhs - 1.0) * (1.0 - 4.0 * t_last / 100.0).powi(2) + 1.0 - l2;
        assert_abs_diff_eq!(refined.worst_margin, expect, epsilon = 1e-12);
    }

    #[test]
    fn concavity_cases() {
        let linear: Vec<Sample> = (0..50)
            .map(|i| Sample {
                t: i as f64 * 0.01,
                a_min: (4.0 - 4.0 * i as f64 * 0.01).sqrt(),
                ..Default::default()
            })
            .collect();
        let r = concavity_check(&traj(linear), 1e-9);
        assert!(r.passed);
        assert!(r.worst_margin.unwrap().abs() < 1e-6);
        let convex: Vec<Sample> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.01;
                Sample {
                    t,
                    a_min: 1.0 - t,
                    ..Default::default()
                }
            })
            .collect();
        let r = concavity_check(&traj(convex), 1e-3);
        assert_eq!(r.status, MonitorStatus::Violated);
        assert!(r.evidence_only && !r.is_hard_violation());
        let short = traj(sphere_series()[..10].to_vec());
        assert_eq!(concavity_check(&short, 0.0).status, MonitorStatus::NotApplicable);
    }

    #[test]
    fn eccentricity_detects_growth() {
        let mut s = sphere_series();
        s[100].ecc_ac = 0.5;
        let r = eccentricity_monitor(&traj(s), 1e-6);
        assert_eq!(r.status, MonitorStatus::Violated);
        assert_abs_diff_eq!(r.worst_margin.unwrap(), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn heat_equation_sup_nonincreasing() {
        // model problem: u_t = u_zz on the circle by explicit Euler; the
        // maximum principle makes sup u nonincreasing
        let n = 64;
        let dz = std::f64::consts::TAU / n as f64;
        let dt = 0.25 * dz * dz;
        let mut u: Vec<f64> = (0..n)
            .map(|k| {
                let z = k as f64 * dz;
                z.sin() + 0.3 * (5.0 * z).cos()
            })
            .collect();
        let mut samples = vec![];
        for step in 0..2000 {
            let sup = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            samples.push(Sample {
                t: step as f64 * dt,
                ecc_bc: sup,
                ecc_ac: sup,
                ..Default::default()
            });
            let next: Vec<f64> = (0..n)
                .map(|k| u[k] + dt / (dz * dz) * (u[(k + 1) % n] - 2.0 * u[k] + u[(k + n - 1) % n]))
                .collect();
            u = next;
        }
        let r = eccentricity_monitor(&traj(samples), 0.0);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn monitor_names_round_trip() {
        for k in MonitorKind::ALL {
            assert_eq!(k.name().parse::<MonitorKind>().unwrap(), k);
        }
        assert!("nope".parse::<MonitorKind>().is_err());
    }

    #[test]
    fn monitors_are_pure() {
        let t = traj(sphere_series());
        let rep = sphere_report();
        let a = run_monitors(&t, Some(&rep), &MonitorKind::ALL, Tolerance::default());
        let b = run_monitors(&t, Some(&rep), &MonitorKind::ALL, Tolerance::default());
        assert_eq!(a, b);
    }
}
