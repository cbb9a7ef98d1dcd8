//! Ricci flow of triaxial Bianchi IX metrics `phi^2 dz^2 + a^2 w1^2 + b^2 w2^2 + c^2 w3^2`
//! on `S^1 x S^3`, with curvature oracles and runtime checks of the flow's
//! a-priori bounds.

pub mod cli;
pub mod config;
pub mod convergence;
pub mod curvature;
pub mod error;
pub mod flow;
pub mod grid;
pub mod monitors;
pub mod output;
pub mod preset;
pub mod run;

pub use config::{load_config, RunConfig};
pub use error::{FlowError, Result};
pub use flow::{evolve, FlowConfig, SingularityReport, StopReason, Trajectory};
pub use grid::{MetricState, PeriodicGrid, ScalarField};
pub use preset::{preset_by_name, presets, Preset, Profile};
pub use run::{execute, RunOutcome};
