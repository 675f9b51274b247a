//! File export: force histories, field snapshots, summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::diagnostics::ForceHistory;
use crate::error::Result;
use crate::grid::FluidState;
use crate::operators::{collocate_cell_centered, FluidOperators};

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// `t,Fx,Fy,Cd,Cl` rows.
pub fn write_force_history(path: &Path, history: &ForceHistory) -> Result<()> {
    let mut out = String::from("t,Fx,Fy,Cd,Cl\n");
    for r in history.rows() {
        writeln!(out, "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", r.t, r.fx, r.fy, r.cd, r.cl)
            .unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Cell-centered collocated snapshot: `i,j,ux,uy,p,vorticity`.
pub fn write_snapshot(
    path: &Path,
    state: &FluidState,
    ops: &FluidOperators,
) -> Result<()> {
    let mut out = String::with_capacity(32 * ops.n_f());
    writeln!(out, "# t = {:.12e}, nx = {}, ny = {}", state.t, ops.grid.nx, ops.grid.ny).unwrap();
    out.push_str("i,j,ux,uy,p,vorticity\n");
    for (i, j, ux, uy, p, om) in collocate_cell_centered(&state.u, &state.p, ops) {
        writeln!(out, "{i},{j},{ux:.9e},{uy:.9e},{p:.9e},{om:.9e}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Normalized thrust history: the peak magnitude maps to exactly one.
pub fn write_normalized_thrust(path: &Path, times: &[f64], thrust: &[f64]) -> Result<()> {
    let peak = thrust.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { peak } else { 1.0 };
    let mut out = String::from("t,thrust_normalized\n");
    for (t, f) in times.iter().zip(thrust) {
        writeln!(out, "{:.12e},{:.12e}", t, f / scale).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Key/value summary, one `key = value` per line, written in call order.
pub fn write_summary(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    let mut out = String::new();
    for (k, v) in entries {
        writeln!(out, "{k} = {v}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Per-iteration optimization record: `iter,loss,theta...`.
pub fn write_optimization_history(
    path: &Path,
    losses: &[f64],
    thetas: &[Vec<f64>],
) -> Result<()> {
    let n_theta = thetas.first().map_or(0, |t| t.len());
    let mut out = String::from("iter,loss");
    for m in 0..n_theta {
        write!(out, ",theta{m}").unwrap();
    }
    out.push('\n');
    for (k, loss) in losses.iter().enumerate() {
        write!(out, "{k},{loss:.12e}").unwrap();
        if let Some(theta) = thetas.get(k) {
            for v in theta {
                write!(out, ",{v:.12e}").unwrap();
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
