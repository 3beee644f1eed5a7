//! Artifact emission: JSON envelope, flat CSV tables, gnuplot-ready columns.
//!
//! All writers go through temp-file-plus-rename so a crashed run never
//! leaves a partial artifact behind. Numbers are printed with Rust's
//! shortest-roundtrip formatting, so identical inputs give identical bytes.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Setting constants embedded in every report: the certificate constant C,
/// the curvature bounds B and R (identically zero on the flat torus), and
/// inf Δf over the density.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Constants {
    pub c: f64,
    pub b: f64,
    pub r: f64,
    pub inf_lap_f: f64,
}

impl Constants {
    pub fn flat_torus(c: f64, inf_lap_f: f64) -> Self {
        Self {
            c,
            b: 0.0,
            r: 0.0,
            inf_lap_f,
        }
    }
}

/// Common frame of every JSON report: which command ran, the full resolved
/// config, the constants, then the command-specific result.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub constants: Constants,
    pub result: T,
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("no file name in {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Io(format!("cannot move {} into place: {e}", tmp.display())))?;
    Ok(())
}

/// Serializes the envelope as a single compact JSON line and returns the
/// bytes that were written.
pub fn write_json<T: Serialize>(path: &Path, envelope: &Envelope<T>) -> Result<String> {
    let mut line = serde_json::to_string(envelope)
        .map_err(|e| CliError::Io(format!("cannot serialize report: {e}")))?;
    line.push('\n');
    write_atomic(path, line.as_bytes())?;
    Ok(line)
}

/// One CSV row per time level of a solved path.
#[derive(Debug, Clone, Copy)]
pub struct LevelRow {
    pub t: f64,
    pub sup_h: f64,
    pub min_eig: f64,
    pub energy: f64,
    pub residual: f64,
}

pub fn write_levels_csv(path: &Path, rows: &[LevelRow]) -> Result<()> {
    let mut text = String::from("t,sup_h,min_eig,E,residual\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.t, r.sup_h, r.min_eig, r.energy, r.residual
        ));
    }
    write_atomic(path, text.as_bytes())
}

/// One CSV row per continuation stage.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub epsilon: f64,
    pub sup_h: f64,
    pub sup_phi_t: f64,
    pub sup_grad: f64,
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut text = String::from("epsilon,sup_h,sup_phi_t,sup_grad\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            r.epsilon, r.sup_h, r.sup_phi_t, r.sup_grad
        ));
    }
    write_atomic(path, text.as_bytes())
}

/// Two-column whitespace-separated data, plottable with `plot "file"`.
pub fn write_xy(path: &Path, comment: &str, rows: &[(f64, f64)]) -> Result<()> {
    let mut text = format!("# {comment}\n");
    for (x, y) in rows {
        text.push_str(&format!("{x} {y}\n"));
    }
    write_atomic(path, text.as_bytes())
}
