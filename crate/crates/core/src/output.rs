//! CSV series, JSON summaries and curvature tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::curvature::sectional_curvatures;
use crate::error::Result;
use crate::flow::{Sample, Trajectory};
use crate::grid::MetricState;
use crate::run::{RunOutcome, RunSummary};

/// Column order of the series CSV.
pub const SERIES_HEADER: [&str; 10] = [
    "t", "dt", "a_min", "b_min", "c_max", "ratio_max", "ecc_bc", "ecc_ac", "s_min", "rm_max",
];

#[derive(Serialize)]
struct SeriesRow {
    t: f64,
    dt: f64,
    a_min: f64,
    b_min: f64,
    c_max: f64,
    ratio_max: f64,
    ecc_bc: f64,
    ecc_ac: f64,
    s_min: f64,
    rm_max: f64,
}

impl From<&Sample> for SeriesRow {
    fn from(s: &Sample) -> Self {
        Self {
            t: s.t,
            dt: s.dt,
            a_min: s.a_min,
            b_min: s.b_min,
            c_max: s.c_max,
            ratio_max: s.ratio_max,
            ecc_bc: s.ecc_bc,
            ecc_ac: s.ecc_ac,
            s_min: s.s_min,
            rm_max: s.rm_max,
        }
    }
}

/// Writes one row per summary sample in round-trip precision.
pub fn write_series_to<W: Write>(traj: &Trajectory, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for s in &traj.samples {
        wtr.serialize(SeriesRow::from(s))?;
    }
    if traj.samples.is_empty() {
        wtr.write_record(SERIES_HEADER)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_series(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    write_series_to(traj, BufWriter::new(File::create(path)?))
}

pub fn summary_json(out: &RunOutcome) -> Result<String> {
    Ok(serde_json::to_string_pretty(&RunSummary::of(out))?)
}

pub fn write_summary(out: &RunOutcome, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, summary_json(out)? + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct CurvatureRow {
    z: f64,
    phi: f64,
    a: f64,
    b: f64,
    c: f64,
    k01: f64,
    k02: f64,
    k03: f64,
    k12: f64,
    k13: f64,
    k23: f64,
    scal: f64,
    rm_norm: f64,
}

/// Pointwise curvature table of one state.
pub fn write_curvature_table<W: Write>(state: &MetricState, w: W) -> Result<()> {
    let curv = sectional_curvatures(state)?;
    let rm = curv.rm_norm();
    let g = state.grid();
    let mut wtr = csv::Writer::from_writer(w);
    for k in 0..g.n() {
        wtr.serialize(CurvatureRow {
            z: g.z(k),
            phi: state.phi()[k],
            a: state.a()[k],
            b: state.b()[k],
            c: state.c()[k],
            k01: curv.k01[k],
            k02: curv.k02[k],
            k03: curv.k03[k],
            k12: curv.k12[k],
            k13: curv.k13[k],
            k23: curv.k23[k],
            scal: curv.scal[k],
            rm_norm: rm[k],
        })?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::flow::FlowConfig;
    use crate::run::execute;

    fn sphere_run(t_max: f64) -> RunOutcome {
        let cfg = RunConfig {
            preset: crate::config::PresetSpec::Named("sphere".into()),
            grid_n: 32,
            flow: FlowConfig {
                t_max,
                monitor_stride: 50,
                ..FlowConfig::default()
            },
            ..RunConfig::default()
        };
        execute(&cfg).unwrap()
    }

    #[test]
    fn header_and_row_count() {
        let out = sphere_run(0.05);
        let mut buf = vec![];
        write_series_to(&out.trajectory, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SERIES_HEADER.join(","));
        assert_eq!(lines.count(), out.trajectory.samples.len());
    }

    #[test]
    fn sphere_has_zero_eccentricity() {
        let out = sphere_run(0.05);
        let mut buf = vec![];
        write_series_to(&out.trajectory, &mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        for rec in rdr.records() {
            let rec = rec.unwrap();
            assert_eq!(rec[6].parse::<f64>().unwrap(), 0.0);
            assert_eq!(rec[7].parse::<f64>().unwrap(), 0.0);
        }
    }

    #[test]
    fn values_round_trip() {
        let out = sphere_run(0.05);
        let mut buf = vec![];
        write_series_to(&out.trajectory, &mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        for (rec, s) in rdr.records().zip(&out.trajectory.samples) {
            let rec = rec.unwrap();
            assert_eq!(rec[0].parse::<f64>().unwrap(), s.t);
            assert_eq!(rec[2].parse::<f64>().unwrap(), s.a_min);
            assert_eq!(rec[9].parse::<f64>().unwrap(), s.rm_max);
        }
    }

    #[test]
    fn t_max_stop_has_null_estimate() {
        let out = sphere_run(0.05);
        let v: serde_json::Value = serde_json::from_str(&summary_json(&out).unwrap()).unwrap();
        assert_eq!(v["stop_reason"], "t_max_reached");
        assert!(v["t_estimate"].is_null());
        assert!(v["type1"].is_null());
        assert_eq!(v["config"]["grid_n"], 32);
        assert_eq!(v["monitors"]["ordering"]["passed"], true);
        assert_eq!(v["theorem_constants"]["lambda0"], 3.0);
    }

    #[test]
    fn curvature_table_shape() {
        let g = crate::grid::PeriodicGrid::new(32).unwrap();
        let s = crate::preset::fig_a().initial_state(g).unwrap();
        let mut buf = vec![];
        write_curvature_table(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("z,phi,a,b,c,k01,k02,k03,k12,k13,k23,scal,rm_norm\n"));
        assert_eq!(text.lines().count(), 33);
    }
}
