//! One configured run: evolve, monitor, classify.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;
use crate::flow::{evolve, SingularityReport, StopReason, Trajectory};
use crate::monitors::{
    run_monitors, trajectory_constants, type1_classifier, MonitorReport, TheoremConstants,
    TypeIConfig, TypeIReport,
};

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub trajectory: Trajectory,
    pub singularity: Option<SingularityReport>,
    pub reports: Vec<MonitorReport>,
    pub type1: Option<TypeIReport>,
    pub constants: Option<TheoremConstants>,
    pub notes: Vec<String>,
}

impl RunOutcome {
    pub fn has_hard_violation(&self) -> bool {
        self.reports.iter().any(MonitorReport::is_hard_violation)
    }

    pub fn aborted_nonfinite(&self) -> bool {
        self.trajectory.stop_reason == StopReason::NonfiniteDetected
    }

    pub fn report(&self, name: &str) -> Option<&MonitorReport> {
        self.reports.iter().find(|r| r.name == name)
    }
}

pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let initial = cfg.initial_state()?;
    let (trajectory, singularity) = evolve(&initial, &cfg.flow)?;
    let reports = run_monitors(
        &trajectory,
        singularity.as_ref(),
        &cfg.monitors_enabled,
        cfg.tolerance(),
    );
    let mut notes = vec![];
    let type1 = match &singularity {
        Some(rep) => match type1_classifier(&trajectory, rep, &TypeIConfig::default()) {
            Ok(r) => Some(r),
            Err(e) => {
                notes.push(format!("type I classifier skipped: {e}"));
                None
            }
        },
        None => None,
    };
    let constants = trajectory_constants(&trajectory).ok();
    Ok(RunOutcome {
        config: cfg.clone(),
        trajectory,
        singularity,
        reports,
        type1,
        constants,
        notes,
    })
}

/// The JSON run summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary<'a> {
    pub config: &'a RunConfig,
    pub stop_reason: StopReason,
    pub steps: usize,
    pub rejected_steps: usize,
    pub samples: usize,
    pub t_final: Option<f64>,
    pub a_min_final: Option<f64>,
    pub t_estimate: Option<f64>,
    pub fit_residual: Option<f64>,
    pub fit_slope: Option<f64>,
    pub monitors: BTreeMap<&'a str, &'a MonitorReport>,
    pub type1: Option<&'a TypeIReport>,
    pub theorem_constants: Option<&'a TheoremConstants>,
    pub notes: &'a [String],
}

impl<'a> RunSummary<'a> {
    pub fn of(out: &'a RunOutcome) -> Self {
        let last = out.trajectory.final_sample();
        let sing = out.singularity.as_ref();
        Self {
            config: &out.config,
            stop_reason: out.trajectory.stop_reason,
            steps: out.trajectory.steps,
            rejected_steps: out.trajectory.rejected_steps,
            samples: out.trajectory.samples.len(),
            t_final: last.map(|s| s.t),
            a_min_final: last.map(|s| s.a_min),
            t_estimate: sing.map(|r| r.t_estimate),
            fit_residual: sing.map(|r| r.fit_residual),
            fit_slope: sing.map(|r| r.fit_slope),
            monitors: out.reports.iter().map(|r| (r.name.as_str(), r)).collect(),
            type1: out.type1.as_ref(),
            theorem_constants: out.constants.as_ref(),
            notes: &out.notes,
        }
    }
}
