//! Run configuration: JSON documents with defaults for absent keys.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::flow::FlowConfig;
use crate::grid::{MetricState, PeriodicGrid, StencilOrder};
use crate::monitors::{MonitorKind, Tolerance};
use crate::preset::{preset_by_name, Preset};

/// A preset id such as `"fig-a"` or `"sphere(1.5)"`, or inline profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PresetSpec {
    Named(String),
    Inline(Preset),
}

impl PresetSpec {
    pub fn resolve(&self) -> Result<Preset> {
        match self {
            PresetSpec::Named(id) => preset_by_name(id),
            PresetSpec::Inline(p) => Ok(p.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: PresetSpec,
    pub grid_n: usize,
    pub stencil: StencilOrder,
    pub flow: FlowConfig,
    pub monitors_enabled: Vec<MonitorKind>,
    /// Multiplier in the monitor tolerance `kappa (dz^order + dt_mean)`.
    pub kappa: f64,
    pub out_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: PresetSpec::Named("fig-a".into()),
            grid_n: 256,
            stencil: StencilOrder::default(),
            flow: FlowConfig::default(),
            monitors_enabled: MonitorKind::ALL.to_vec(),
            kappa: Tolerance::default().kappa,
            out_dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

/// Smallest grid accepted for runs.
pub const MIN_GRID_N: usize = 32;

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_n % 2 != 0 || self.grid_n < MIN_GRID_N {
            return Err(FlowError::Config(format!(
                "grid_n must be even and at least {MIN_GRID_N}, got {}",
                self.grid_n
            )));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(FlowError::Config(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        self.flow.validate()?;
        self.preset.resolve()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::with_order(self.grid_n, self.stencil)
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance::new(self.kappa)
    }

    pub fn initial_state(&self) -> Result<MetricState> {
        self.preset.resolve()?.initial_state(self.grid()?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| FlowError::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Reads and validates a JSON config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| FlowError::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_json(&text)
}

pub fn save_config(cfg: &RunConfig, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, cfg.to_json()? + "\n")?;
    Ok(())
}
