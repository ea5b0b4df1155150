//! CSV and JSON output.
//!
//! Numbers are written in scientific notation with 17 significant digits, so
//! every `f64` reads back exactly. Missing values (a `C` off the biaxial
//! subspace, a non-finite entry) are empty fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::MetricProfile;
use crate::integrator::Trajectory;
use crate::state::Chart;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: bad number {field:?} in row {row}")]
    Parse { path: PathBuf, row: usize, field: String },
}

/// `d.dddddddddddddddde+XX`; empty for non-finite values.
pub fn fmt_sci(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    let s = format!("{:.16e}", x);
    let (m, e) = s.split_once('e').expect("exponent");
    let e: i32 = e.parse().expect("exponent digits");
    format!("{m}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sci).unwrap_or_default()
}

pub const PRIMAL_HEADER: [&str; 12] = ["r", "s", "xi", "L1", "L2", "L3", "R1", "R2", "R3", "C", "Z", "Z_scaled"];
pub const COMPACT_HEADER: [&str; 12] = ["s", "r", "Lcal", "X1", "X2", "X3", "Y1", "Y2", "Y3", "C", "Z", "Z_scaled"];
pub const PROFILE_HEADER: [&str; 5] = ["r_arc", "f1", "f2", "f3", "u_prime"];

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, IoError> {
    csv::Writer::from_path(path).map_err(|source| IoError::Csv { path: path.into(), source })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.into(), source }
}

/// Per-chart file names for a stem: `<stem>_primal.csv`, `<stem>_compact.csv`.
pub fn trajectory_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let name = stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    (stem.with_file_name(format!("{name}_primal.csv")), stem.with_file_name(format!("{name}_compact.csv")))
}

/// Write one CSV per chart; returns the paths written (a chart without
/// samples still gets a header-only file).
pub fn write_trajectory_csv(traj: &Trajectory, stem: &Path) -> Result<Vec<PathBuf>, IoError> {
    let (pp, cp) = trajectory_paths(stem);
    let mut wp = csv_writer(&pp)?;
    let mut wc = csv_writer(&cp)?;
    wp.write_record(PRIMAL_HEADER).map_err(csv_err(&pp))?;
    wc.write_record(COMPACT_HEADER).map_err(csv_err(&cp))?;
    for (smp, rep) in traj.samples.iter().zip(&traj.conserved_log) {
        let (t, other) = match smp.chart {
            Chart::Primal => (smp.r, smp.s),
            Chart::Compact => (smp.s, smp.r),
        };
        let mut row = vec![fmt_sci(t), fmt_sci(other)];
        row.extend(smp.state.iter().map(|v| fmt_sci(*v)));
        row.push(opt(rep.c));
        row.push(fmt_sci(rep.z));
        row.push(fmt_sci(rep.z_scaled));
        match smp.chart {
            Chart::Primal => wp.write_record(&row).map_err(csv_err(&pp))?,
            Chart::Compact => wc.write_record(&row).map_err(csv_err(&cp))?,
        }
    }
    wp.flush().map_err(|source| IoError::Io { path: pp.clone(), source })?;
    wc.flush().map_err(|source| IoError::Io { path: cp.clone(), source })?;
    Ok(vec![pp, cp])
}

pub fn write_profile_csv(profile: &MetricProfile, path: &Path) -> Result<(), IoError> {
    let mut w = csv_writer(path)?;
    w.write_record(PROFILE_HEADER).map_err(csv_err(path))?;
    for s in &profile.samples {
        w.write_record([fmt_sci(s.r), fmt_sci(s.f[0]), fmt_sci(s.f[1]), fmt_sci(s.f[2]), fmt_sci(s.u_prime)])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| IoError::Io { path: path.into(), source })
}

/// Header and rows of a numeric CSV; empty fields become `None`.
pub type Table = (Vec<String>, Vec<Vec<Option<f64>>>);

pub fn read_csv(path: &Path) -> Result<Table, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = rec
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>().map(Some).map_err(|_| IoError::Parse { path: path.into(), row: k, field: f.into() })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let f = File::create(path).map_err(|source| IoError::Io { path: path.into(), source })?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|source| IoError::Io { path: path.into(), source })
}

/// Everything about a trajectory except the samples.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryMeta<'a> {
    pub params: &'a crate::state::ShootParams,
    pub config: &'a crate::integrator::ShootConfig,
    pub launch_epsilon: f64,
    pub launch_state: crate::state::State7,
    pub events: &'a [crate::integrator::EventRecord],
    pub termination: crate::integrator::Termination,
    pub reduced: bool,
    pub einstein: bool,
    pub samples: usize,
    pub warnings: &'a [String],
}

pub fn trajectory_meta(traj: &Trajectory) -> TrajectoryMeta<'_> {
    TrajectoryMeta {
        params: &traj.params,
        config: &traj.config,
        launch_epsilon: traj.launch.epsilon,
        launch_state: traj.launch.state_at_eps.to_array(),
        events: &traj.events,
        termination: traj.termination,
        reduced: traj.reduced,
        einstein: traj.einstein,
        samples: traj.samples.len(),
        warnings: &traj.warnings,
    }
}
