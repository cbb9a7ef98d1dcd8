//! Refinement studies: measured orders of the curvature-oracle mismatch and
//! of the `K0i` evolution residual.

use serde::Serialize;

use crate::curvature::oracle_mismatch;
use crate::error::{FlowError, Result};
use crate::flow::rk4_step;
use crate::grid::{MetricState, PeriodicGrid, StencilOrder};
use crate::monitors::{k0_residual, ResidualSample, K0};
use crate::preset::Preset;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    pub n: usize,
    pub dz: f64,
    /// Time step, for studies that step in time.
    pub dt: Option<f64>,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Study {
    pub name: String,
    pub levels: Vec<Level>,
    /// `log(e_i / e_{i+1}) / log(dz_i / dz_{i+1})` for consecutive levels.
    pub orders: Vec<f64>,
}

impl Study {
    fn new(name: String, levels: Vec<Level>) -> Self {
        let orders = levels
            .windows(2)
            .map(|w| (w[0].error / w[1].error).ln() / (w[0].dz / w[1].dz).ln())
            .collect();
        Self {
            name,
            levels,
            orders,
        }
    }

    /// Smallest measured order, `NaN` with fewer than two levels.
    pub fn min_order(&self) -> f64 {
        self.orders.iter().cloned().fold(f64::NAN, f64::min)
    }
}

fn check_levels(ns: &[usize]) -> Result<()> {
    if ns.len() < 2 || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FlowError::InvalidArgument(
            "need at least two strictly increasing grid sizes".into(),
        ));
    }
    Ok(())
}

/// Closed-form curvatures against the frame-symbol oracle at `t = 0`.
pub fn curvature_study(preset: &Preset, ns: &[usize], order: StencilOrder) -> Result<Study> {
    check_levels(ns)?;
    let levels = ns
        .iter()
        .map(|&n| {
            let g = PeriodicGrid::with_order(n, order)?;
            let s = preset.initial_state(g)?;
            Ok(Level {
                n,
                dz: g.dz(),
                dt: None,
                error: oracle_mismatch(&s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Study::new(format!("curvature_oracle[{}]", preset.name), levels))
}

/// Parameters of the residual study: the coarsest grid takes `coarse_steps`
/// steps of `coarse_dt`; every finer level halves `dt` with `dz` and takes
/// proportionally more steps, so all levels end at the same time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualStudyConfig {
    pub coarse_dt: f64,
    pub coarse_steps: usize,
}

impl ResidualStudyConfig {
    /// `dt = 0.05 dz^2` on the coarsest grid, eight steps.
    pub fn for_coarsest(n: usize) -> Self {
        let dz = std::f64::consts::TAU / n as f64;
        Self {
            coarse_dt: 0.05 * dz * dz,
            coarse_steps: 8,
        }
    }
}

/// Last three states after `steps` RK4 steps of `dt`.
fn last_three(initial: &MetricState, dt: f64, steps: usize) -> Result<[MetricState; 3]> {
    if steps < 2 {
        return Err(FlowError::InvalidArgument("need at least two steps".into()));
    }
    let mut hist = [initial.clone(), initial.clone(), initial.clone()];
    let mut s = initial.clone();
    for k in 0..steps {
        // exact step times, free of accumulated rounding
        let mut next = rk4_step(&s, dt)?;
        next.t = initial.t + (k + 1) as f64 * dt;
        hist.rotate_left(1);
        hist[2] = next.clone();
        s = next;
    }
    Ok(hist)
}

/// Max-norm `K0i` residual at the final time, under simultaneous halving of
/// `dt` and `dz`.
pub fn residual_study(
    preset: &Preset,
    ns: &[usize],
    which: K0,
    cfg: ResidualStudyConfig,
) -> Result<(Study, Vec<ResidualSample>)> {
    check_levels(ns)?;
    let n0 = ns[0];
    let mut levels = vec![];
    let mut samples = vec![];
    for &n in ns {
        if n % n0 != 0 {
            return Err(FlowError::InvalidArgument(format!(
                "grid size {n} is not a multiple of {n0}"
            )));
        }
        let ratio = n / n0;
        let dt = cfg.coarse_dt / ratio as f64;
        let g = PeriodicGrid::new(n)?;
        let s0 = preset.initial_state(g)?;
        let [a, b, c] = last_three(&s0, dt, cfg.coarse_steps * ratio)?;
        let r = k0_residual(&a, &b, &c, which)?;
        levels.push(Level {
            n,
            dz: g.dz(),
            dt: Some(dt),
            error: r.residual,
        });
        samples.push(r);
    }
    Ok((
        Study::new(format!("{}_residual[{}]", which.name(), preset.name), levels),
        samples,
    ))
}
