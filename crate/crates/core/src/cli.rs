//! Command-line front end. Exit codes: 0 success, 1 usage or setup error,
//! 2 run aborted on a nonfinite value, 3 monitor violation under `--strict`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, OutputFormat, PresetSpec, RunConfig};
use crate::convergence::{curvature_study, residual_study, ResidualStudyConfig, Study};
use crate::error::{FlowError, Result};
use crate::monitors::{MonitorKind, MonitorStatus, K0};
use crate::output::{summary_json, write_curvature_table, write_series};
use crate::preset::presets;
use crate::run::execute;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NONFINITE: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bianchi-flow", version, about = "Ricci flow of triaxial Bianchi IX metrics on S^1 x S^3")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve a preset, run the monitors and write the series and summary.
    Run(RunArgs),
    /// List the built-in presets.
    Presets,
    /// Curvature table of a preset at t = 0.
    Curvature(CurvatureArgs),
    /// Grid and step refinement study with measured orders.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Preset id, e.g. fig-a, sphere(2), biaxial(1,2).
    #[arg(long)]
    preset: Option<String>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    grid_n: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Output formats (csv, json).
    #[arg(long, value_delimiter = ',')]
    format: Vec<String>,
    /// Monitors to run, by name, or "all".
    #[arg(long, value_delimiter = ',')]
    monitors: Vec<String>,
    /// Exit with status 3 if any monitor is violated.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct CurvatureArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    /// Number of grid levels, each doubling the previous.
    #[arg(long, default_value_t = 3)]
    levels: usize,
}

fn build_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &c.preset {
        cfg.preset = PresetSpec::Named(p.clone());
    }
    if let Some(n) = c.grid_n {
        cfg.grid_n = n;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn parse_formats(items: &[String]) -> Result<Option<Vec<OutputFormat>>> {
    if items.is_empty() {
        return Ok(None);
    }
    items
        .iter()
        .map(|s| match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(FlowError::Config(format!("unknown format '{other}'"))),
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn parse_monitors(items: &[String]) -> Result<Option<Vec<MonitorKind>>> {
    match items {
        [] => Ok(None),
        [all] if all == "all" => Ok(Some(MonitorKind::ALL.to_vec())),
        _ => items
            .iter()
            .map(|s| s.trim().parse())
            .collect::<Result<Vec<_>>>()
            .map(Some),
    }
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<i32> {
    let mut cfg = build_config(&args.common)?;
    if let Some(f) = parse_formats(&args.format)? {
        cfg.formats = f;
    }
    if let Some(m) = parse_monitors(&args.monitors)? {
        cfg.monitors_enabled = m;
    }
    cfg.validate()?;
    let res = execute(&cfg)?;
    fs::create_dir_all(&cfg.out_dir)?;
    if cfg.formats.contains(&OutputFormat::Csv) {
        write_series(&res.trajectory, cfg.out_dir.join("series.csv"))?;
    }
    if cfg.formats.contains(&OutputFormat::Json) {
        fs::write(cfg.out_dir.join("summary.json"), summary_json(&res)? + "\n")?;
    }

    let traj = &res.trajectory;
    writeln!(
        out,
        "stop: {} after {} steps ({} rejected), t = {:.9}",
        traj.stop_reason.as_str(),
        traj.steps,
        traj.rejected_steps,
        traj.final_sample().map_or(f64::NAN, |s| s.t)
    )?;
    match &res.singularity {
        Some(s) => writeln!(out, "T estimate: {:.9} (fit residual {:.3e})", s.t_estimate, s.fit_residual)?,
        None => writeln!(out, "T estimate: none")?,
    }
    for r in &res.reports {
        let status = match r.status {
            MonitorStatus::Passed => "pass",
            MonitorStatus::Violated if r.evidence_only => "FAIL (evidence)",
            MonitorStatus::Violated => "FAIL",
            MonitorStatus::NotApplicable => "n/a",
        };
        match r.worst_margin {
            Some(m) => writeln!(out, "{:<20} {:<16} worst margin {:+.3e}", r.name, status, m)?,
            None => writeln!(out, "{:<20} {}", r.name, status)?,
        }
    }
    if let Some(t1) = &res.type1 {
        writeln!(
            out,
            "type I: {:?} (slope {:+.3}, band [{:.4}, {:.4}])",
            t1.classification, t1.slope, t1.ratio_band.0, t1.ratio_band.1
        )?;
    }
    if res.aborted_nonfinite() {
        return Ok(EXIT_NONFINITE);
    }
    if args.strict && res.has_hard_violation() {
        return Ok(EXIT_VIOLATION);
    }
    Ok(EXIT_OK)
}

fn cmd_presets(out: &mut dyn Write) -> Result<i32> {
    for p in presets() {
        writeln!(
            out,
            "{:<16} phi0 = {}, a0 = {}, b0 = {}, c0 = {}",
            p.name, p.phi0, p.a0, p.b0, p.c0
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_curvature(args: &CurvatureArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = build_config(&args.common)?;
    cfg.validate()?;
    let state = cfg.initial_state()?;
    if args.common.out.is_some() {
        fs::create_dir_all(&cfg.out_dir)?;
        write_curvature_table(&state, fs::File::create(cfg.out_dir.join("curvature.csv"))?)?;
    } else {
        write_curvature_table(&state, out)?;
    }
    Ok(EXIT_OK)
}

fn print_study(s: &Study, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{}", s.name)?;
    for (i, l) in s.levels.iter().enumerate() {
        let order = if i == 0 {
            String::new()
        } else {
            format!("order {:.3}", s.orders[i - 1])
        };
        writeln!(out, "  n = {:<5} error {:.6e}  {order}", l.n, l.error)?;
    }
    Ok(())
}

fn cmd_convergence(args: &ConvergenceArgs, out: &mut dyn Write) -> Result<i32> {
    let mut cfg = build_config(&args.common)?;
    if args.common.grid_n.is_none() && args.common.config.is_none() {
        cfg.grid_n = 32;
    }
    cfg.validate()?;
    if args.levels < 2 {
        return Err(FlowError::Config("--levels must be at least 2".into()));
    }
    let ns: Vec<usize> = (0..args.levels).map(|i| cfg.grid_n << i).collect();
    let preset = cfg.preset.resolve()?;
    let curv = curvature_study(&preset, &ns, cfg.stencil)?;
    let (resid, _) = residual_study(
        &preset,
        &ns,
        K0::K01,
        ResidualStudyConfig::for_coarsest(ns[0]),
    )?;
    print_study(&curv, out)?;
    print_study(&resid, out)?;
    if args.common.out.is_some() {
        fs::create_dir_all(&cfg.out_dir)?;
        let json = serde_json::to_string_pretty(&[&curv, &resid])?;
        fs::write(cfg.out_dir.join("convergence.json"), json + "\n")?;
    }
    Ok(EXIT_OK)
}

/// Runs the CLI on `args` (including the program name), writing normal
/// output to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Presets => cmd_presets(out),
        Command::Curvature(a) => cmd_curvature(a, out),
        Command::Convergence(a) => cmd_convergence(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                FlowError::NonFinite { .. } => EXIT_NONFINITE,
                _ => EXIT_USAGE,
            }
        }
    }
}
