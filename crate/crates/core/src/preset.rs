//! Initial-data presets and the profile descriptors they are built from.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};
use crate::grid::{MetricState, PeriodicGrid, ScalarField};

/// One initial profile in `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant(f64),
    /// `amp * cos(k z) + offset`
    Cos { amp: f64, k: u32, offset: f64 },
    /// `amp * sin(k z) + offset`
    Sin { amp: f64, k: u32, offset: f64 },
    /// Explicit grid values; the length must equal the grid size.
    Samples(Vec<f64>),
}

impl Profile {
    pub fn cos(amp: f64, k: u32, offset: f64) -> Self {
        Profile::Cos { amp, k, offset }
    }

    pub fn sin(amp: f64, k: u32, offset: f64) -> Self {
        Profile::Sin { amp, k, offset }
    }

    pub fn eval(&self, grid: PeriodicGrid) -> Result<ScalarField> {
        match self {
            Profile::Constant(v) => ScalarField::constant(grid, *v),
            Profile::Cos { amp, k, offset } => {
                ScalarField::from_fn(grid, |z| amp * (*k as f64 * z).cos() + offset)
            }
            Profile::Sin { amp, k, offset } => {
                ScalarField::from_fn(grid, |z| amp * (*k as f64 * z).sin() + offset)
            }
            Profile::Samples(v) => ScalarField::new(grid, v.clone()),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let trig = |f: &mut fmt::Formatter<'_>, name, amp, k: u32, offset| {
            let arg = if k == 1 { "z".to_string() } else { format!("{k}z") };
            write!(f, "{amp}*{name}({arg})+{offset}")
        };
        match self {
            Profile::Constant(v) => write!(f, "{v}"),
            Profile::Cos { amp, k, offset } => trig(f, "cos", amp, *k, offset),
            Profile::Sin { amp, k, offset } => trig(f, "sin", amp, *k, offset),
            Profile::Samples(v) => write!(f, "<{} samples>", v.len()),
        }
    }
}

/// Named initial data `(phi0, a0, b0, c0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub name: String,
    pub phi0: Profile,
    pub a0: Profile,
    pub b0: Profile,
    pub c0: Profile,
    /// Whether `a0 <= b0 <= c0` holds by construction.
    #[serde(default)]
    pub ordered: bool,
}

impl Preset {
    fn new(name: &str, a0: Profile, b0: Profile, c0: Profile, ordered: bool) -> Self {
        Self {
            name: name.to_string(),
            phi0: Profile::Constant(1.0),
            a0,
            b0,
            c0,
            ordered,
        }
    }

    /// Evaluates the profiles on `grid`. Fails on nonpositive values, and on
    /// unordered values when the preset claims ordering.
    pub fn initial_state(&self, grid: PeriodicGrid) -> Result<MetricState> {
        let state = MetricState::new(
            0.0,
            self.phi0.eval(grid)?,
            self.a0.eval(grid)?,
            self.b0.eval(grid)?,
            self.c0.eval(grid)?,
        )?;
        if self.ordered {
            let (m, k) = state.ordering_margin();
            if m < 0.0 {
                return Err(FlowError::Config(format!(
                    "preset '{}' claims a0 <= b0 <= c0 but the margin is {m} at index {k}",
                    self.name
                )));
            }
        }
        Ok(state)
    }
}

/// `(1, cos z + 1.5, cos z + 2.5, cos z + 3.5)`
pub fn fig_a() -> Preset {
    Preset::new(
        "fig-a",
        Profile::cos(1.0, 1, 1.5),
        Profile::cos(1.0, 1, 2.5),
        Profile::cos(1.0, 1, 3.5),
        true,
    )
}

/// `(1, cos 2z + 1.5, sin z + 4, 6)`
pub fn fig_b() -> Preset {
    Preset::new(
        "fig-b",
        Profile::cos(1.0, 2, 1.5),
        Profile::sin(1.0, 1, 4.0),
        Profile::Constant(6.0),
        true,
    )
}

/// `(1, cos z / 2 + 1, cos z + 2, 2 cos z + 4)`
pub fn fig_c() -> Preset {
    Preset::new(
        "fig-c",
        Profile::cos(0.5, 1, 1.0),
        Profile::cos(1.0, 1, 2.0),
        Profile::cos(2.0, 1, 4.0),
        true,
    )
}

/// Round `S^3` of radius `r` times a circle of length `2 pi`.
pub fn sphere(r: f64) -> Preset {
    let mut p = Preset::new(
        "sphere",
        Profile::Constant(r),
        Profile::Constant(r),
        Profile::Constant(r),
        true,
    );
    p.name = format!("sphere({r})");
    p
}

/// Berger-type data `(1, a0, c0, c0)`.
pub fn biaxial(a0: f64, c0: f64) -> Preset {
    Preset::new(
        &format!("biaxial({a0},{c0})"),
        Profile::Constant(a0),
        Profile::Constant(c0),
        Profile::Constant(c0),
        a0 <= c0,
    )
}

/// Ordered data with `max c0/a0 = 1.2`, `min S0 > 0`.
pub fn lambda12() -> Preset {
    Preset::new(
        "lambda12",
        Profile::cos(0.2, 1, 1.0),
        Profile::cos(0.22, 1, 1.1),
        Profile::cos(0.24, 1, 1.2),
        true,
    )
}

/// Ordered data with `max c0/a0 = 1.5`, `min S0 > 0`.
pub fn lambda15() -> Preset {
    Preset::new(
        "lambda15",
        Profile::cos(0.2, 1, 1.0),
        Profile::cos(0.25, 1, 1.25),
        Profile::cos(0.3, 1, 1.5),
        true,
    )
}

/// The built-in presets, with default parameters for `sphere` (r = 2) and
/// `biaxial` (a0 = 1, c0 = 2).
pub fn presets() -> Vec<Preset> {
    vec![
        fig_a(),
        fig_b(),
        fig_c(),
        sphere(2.0),
        biaxial(1.0, 2.0),
        lambda12(),
        lambda15(),
    ]
}

fn parse_args(name: &str, inner: &str, want: usize) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> =
        inner.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if v.len() == want && v.iter().all(|x| x.is_finite() && *x > 0.0) => Ok(v),
        _ => Err(FlowError::Config(format!(
            "preset '{name}' takes {want} positive number(s), got '{inner}'"
        ))),
    }
}

/// Looks up a preset by id: `fig-a`, `fig-b`, `fig-c`, `lambda12`,
/// `lambda15`, `sphere`, `sphere(r)`, `biaxial` or `biaxial(a0,c0)`.
pub fn preset_by_name(id: &str) -> Result<Preset> {
    let id = id.trim();
    let (head, args) = match id.split_once('(') {
        Some((h, rest)) => match rest.strip_suffix(')') {
            Some(inner) => (h.trim(), Some(inner)),
            None => {
                return Err(FlowError::Config(format!("malformed preset id '{id}'")));
            }
        },
        None => (id, None),
    };
    match (head, args) {
        ("fig-a", None) => Ok(fig_a()),
        ("fig-b", None) => Ok(fig_b()),
        ("fig-c", None) => Ok(fig_c()),
        ("lambda12", None) => Ok(lambda12()),
        ("lambda15", None) => Ok(lambda15()),
        ("sphere", None) => Ok(sphere(2.0)),
        ("sphere", Some(s)) => Ok(sphere(parse_args(head, s, 1)?[0])),
        ("biaxial", None) => Ok(biaxial(1.0, 2.0)),
        ("biaxial", Some(s)) => {
            let v = parse_args(head, s, 2)?;
            Ok(biaxial(v[0], v[1]))
        }
        _ => Err(FlowError::Config(format!(
            "unknown preset '{id}' (try: fig-a, fig-b, fig-c, sphere, biaxial, lambda12, lambda15)"
        ))),
    }
}
