//! Deterministic CSV diagnostics, scenario reports and field snapshots.
//!
//! Floating-point values are printed with Rust's shortest round-trip
//! formatting, so identical runs produce byte-identical files.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::decay::DecayReport;
use crate::evolution::Trajectory;
use crate::grid::{Field, StripGrid};
use crate::weights::WeightSpec;

/// Magic bytes of the snapshot container.
pub const SNAPSHOT_MAGIC: &[u8; 4] = b"ZKSN";
/// Container version.
pub const SNAPSHOT_VERSION: u32 = 1;

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "nan".into()
    }
}

/// Render the diagnostics table. Header:
/// `t,l2,h1,energy,weighted_l2[i]...,residual_l2,residual_weighted[i]...`
/// with one `weighted_l2[i]`/`residual_weighted[i]` pair per probe weight.
/// Residual columns are empty where undefined (series endpoints).
pub fn format_csv(traj: &Trajectory, weights: &[WeightSpec]) -> String {
    let mut out = String::new();
    out.push_str("t,l2,h1,energy");
    for (i, _) in weights.iter().enumerate() {
        out.push_str(&format!(",weighted_l2[{i}]"));
    }
    out.push_str(",residual_l2");
    for (i, _) in weights.iter().enumerate() {
        out.push_str(&format!(",residual_weighted[{i}]"));
    }
    out.push('\n');
    for rec in &traj.records {
        out.push_str(&fmt_f64(rec.t));
        out.push(',');
        out.push_str(&fmt_f64(rec.l2));
        out.push(',');
        out.push_str(&fmt_f64(rec.h1));
        out.push(',');
        out.push_str(&fmt_f64(rec.energy));
        for v in &rec.weighted_l2 {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push(',');
        if let Some(v) = rec.residual_l2 {
            out.push_str(&fmt_f64(v));
        }
        for v in &rec.residual_weighted {
            out.push(',');
            if let Some(v) = v {
                out.push_str(&fmt_f64(*v));
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, traj: &Trajectory, weights: &[WeightSpec]) -> io::Result<()> {
    fs::write(path, format_csv(traj, weights))
}

/// Render a scenario report as diff-friendly `key = value` lines.
pub fn format_report(kind: &str, amplitude: f64, report: &DecayReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("scenario = {kind}\n"));
    out.push_str(&format!("amplitude = {}\n", fmt_f64(amplitude)));
    out.push_str(&format!("fitted_rate = {}\n", fmt_f64(report.fitted_rate)));
    out.push_str(&format!("fit_r2 = {}\n", fmt_f64(report.fit_r2)));
    out.push_str(&format!("bound_holds = {}\n", report.bound_holds));
    out.push_str(&format!(
        "bound_margin = {}\n",
        fmt_f64(report.bound_margin)
    ));
    out.push_str(&format!(
        "prefactor_used = {}\n",
        fmt_f64(report.prefactor_used)
    ));
    out.push_str(&format!(
        "beta_hypothesis = {}\n",
        fmt_f64(report.beta_hypothesis)
    ));
    out.push_str(&format!(
        "observed_prefactor = {}\n",
        fmt_f64(report.observed_prefactor)
    ));
    out.push_str(&format!("tolerance = {}\n", fmt_f64(report.tolerance)));
    out
}

/// Self-describing binary snapshot: magic, version, grid parameters, time,
/// then row-major (x outer, y inner) f64 samples, all little-endian.
pub fn write_snapshot_binary(path: &Path, field: &Field, t: f64) -> io::Result<()> {
    let grid = field.grid();
    let mut buf = Vec::with_capacity(4 + 4 + 2 * 8 + 4 * 8 + grid.nx() * grid.ny() * 8);
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.nx() as u64).to_le_bytes());
    buf.extend_from_slice(&(grid.ny() as u64).to_le_bytes());
    buf.extend_from_slice(&grid.x_min().to_le_bytes());
    buf.extend_from_slice(&grid.x_max().to_le_bytes());
    buf.extend_from_slice(&grid.width_l().to_le_bytes());
    buf.extend_from_slice(&t.to_le_bytes());
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            buf.extend_from_slice(&field.values()[[i, j]].to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)
}

/// Read back a binary snapshot (used for cross-checks and tests).
pub fn read_snapshot_binary(path: &Path) -> io::Result<(Field, f64)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let err = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    if bytes.len() < 56 || &bytes[0..4] != SNAPSHOT_MAGIC {
        return Err(err("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != SNAPSHOT_VERSION {
        return Err(err("unsupported version"));
    }
    let rd_u64 = |off: usize| u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let rd_f64 = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let nx = rd_u64(8) as usize;
    let ny = rd_u64(16) as usize;
    let x_min = rd_f64(24);
    let x_max = rd_f64(32);
    let width_l = rd_f64(40);
    let t = rd_f64(48);
    let grid = StripGrid::new(x_min, x_max, nx, width_l, ny)
        .map_err(|e| err(&format!("bad grid: {e}")))?;
    let need = 56 + nx * ny * 8;
    if bytes.len() != need {
        return Err(err("truncated snapshot"));
    }
    let mut field = Field::zeros(grid);
    let mut off = 56;
    for i in 0..nx {
        for j in 0..ny {
            field.values_mut()[[i, j]] = rd_f64(off);
            off += 8;
        }
    }
    Ok((field, t))
}

/// Snapshot as `x,y,u` rows (text alternative to the binary container).
pub fn write_snapshot_csv(path: &Path, field: &Field, t: f64) -> io::Result<()> {
    let grid = field.grid();
    let mut out = String::new();
    out.push_str(&format!("# t = {}\n", fmt_f64(t)));
    out.push_str("x,y,u\n");
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_f64(grid.x(i)),
                fmt_f64(grid.y(j)),
                fmt_f64(field.values()[[i, j]])
            ));
        }
    }
    fs::write(path, out)
}
