//! CSV and JSON output.

use std::fs::File;
use std::path::Path;

use glosa_core::dddp::DddpIterationLog;
use glosa_core::ddp::DdpLog;
use glosa_core::sdp::ValuePolicyTable;
use glosa_core::{Trajectory, VehicleState};
use serde::Serialize;

use crate::Result;

/// `x` with 9 significant digits, in plain notation where that is short.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-5..=15).contains(&magnitude) {
        let decimals = (8 - magnitude).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.8e}")
    }
}

/// Trajectory as `k,t,x,v,a`; the last row has no control.
pub fn write_trajectory(path: &Path, traj: &Trajectory, dt: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "t", "x", "v", "a"])?;
    for (k, s) in traj.states.iter().enumerate() {
        let a = traj.controls.get(k).map(|a| sig9(*a)).unwrap_or_default();
        w.write_record([k.to_string(), sig9(k as f64 * dt), sig9(s.x), sig9(s.v), a])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let mut r = csv::Reader::from_path(path)?;
    let mut states = Vec::new();
    let mut controls = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|e| crate::HarnessError::Config(format!("{}: column {i}: {e}", path.display())))
        };
        states.push(VehicleState::new(num(2)?, num(3)?));
        if !rec[4].is_empty() {
            controls.push(num(4)?);
        }
    }
    Ok(Trajectory {
        states,
        controls,
        cost: f64::NAN,
    })
}

pub fn write_dddp_log(path: &Path, log: &DddpIterationLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "delta_a", "delta_x", "cost", "improved"])?;
    for it in &log.iterations {
        w.write_record([
            it.iteration.to_string(),
            sig9(it.delta),
            sig9(it.dx),
            sig9(it.cost),
            it.improved.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ddp_log(path: &Path, log: &DdpLog) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "cost", "epsilon", "control_change", "clamps", "projections"])?;
    for it in &log.iterations {
        w.write_record([
            it.iteration.to_string(),
            sig9(it.cost),
            sig9(it.epsilon),
            sig9(it.control_change),
            it.clamps.to_string(),
            it.projections.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per node of stage `k`: `k,x,v,V,a*` (empty fields where infeasible).
pub fn write_sdp_slice(path: &Path, table: &ValuePolicyTable, k: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "x", "v", "V", "a"])?;
    for (x, v, value, a) in table.stage_rows(k) {
        let value = if value.is_finite() { sig9(value) } else { String::new() };
        w.write_record([k.to_string(), sig9(x), sig9(v), value, a.map(sig9).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(File::create(path)?, value)?;
    Ok(())
}

/// Rows of any serializable record type, header from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
