//! JSON and CSV output.
//!
//! Timing columns are left empty unless asked for, so that repeated runs
//! produce byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{BranchTrace, ConvergenceTable};
use crate::cbmfem::{LevelDiagnostics, SolutionSet};
use crate::error::{Error, Result};
use crate::mesh::MeshLevel;
use crate::system::SystemBuilder;
use crate::systems::{unreduced_residual, PairSet, TwoFieldSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionEntry {
    pub id: usize,
    pub parent_id: Option<usize>,
    pub residual: f64,
    pub values: Vec<f64>,
}

/// One level of a scalar run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub level: usize,
    pub h: f64,
    pub solutions: Vec<SolutionEntry>,
}

impl From<&SolutionSet> for SolutionFile {
    fn from(set: &SolutionSet) -> Self {
        SolutionFile {
            level: set.level,
            h: set.h,
            solutions: set
                .records
                .iter()
                .map(|r| SolutionEntry { id: r.id, parent_id: r.parent_id, residual: r.residual_l2, values: r.u.values.clone() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub id: usize,
    pub parent_id: Option<usize>,
    pub residual: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// One level of a two-field run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub level: usize,
    pub h: f64,
    pub solutions: Vec<PairEntry>,
}

impl From<&PairSet> for PairFile {
    fn from(set: &PairSet) -> Self {
        PairFile {
            level: set.level,
            h: set.h,
            solutions: set
                .records
                .iter()
                .map(|r| PairEntry { id: r.id, parent_id: r.parent_id, residual: r.residual_l2, u: r.u.values.clone(), v: r.v.values.clone() })
                .collect(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Euclidean norm of the discrete residual of `values`, assembled afresh.
pub fn reassembled_residual<B: SystemBuilder + ?Sized>(builder: &B, mesh: &MeshLevel, values: &[f64]) -> Result<f64> {
    use crate::system::DiscreteSystem;
    if values.len() != mesh.node_count() {
        return Err(Error::InvalidInput(format!("{} values for a mesh with {} nodes", values.len(), mesh.node_count())));
    }
    let sys = builder.build(mesh)?;
    Ok(sys.residual(values).iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// Same for a two-field pair, using both equations.
pub fn reassembled_pair_residual(spec: &TwoFieldSpec, mesh: &MeshLevel, u: &[f64], v: &[f64]) -> Result<f64> {
    Ok(unreduced_residual(mesh, spec, u, v)?.iter().map(|x| x * x).sum::<f64>().sqrt())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

// NaN marks a value that is undefined for the row (first-level orders).
fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:e}")
    }
}

fn fmt_time(t: f64, timings: bool) -> String {
    if timings {
        format!("{t:.3}")
    } else {
        String::new()
    }
}

/// Per-level guess and filter counts.
pub fn diagnostics_csv(diags: &[LevelDiagnostics], timings: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "level",
        "h",
        "parents",
        "guesses",
        "truncated",
        "rejected_locality",
        "rejected_convergence",
        "rejected_boundedness",
        "newton_attempts",
        "newton_successes",
        "solutions",
        "wall_seconds",
    ])
    .map_err(csv_err)?;
    for d in diags {
        w.write_record([
            d.level.to_string(),
            format!("{:e}", d.h),
            d.parents.to_string(),
            d.guesses.to_string(),
            d.truncated.to_string(),
            d.rejected_locality.to_string(),
            d.rejected_convergence.to_string(),
            d.rejected_boundedness.to_string(),
            d.newton_attempts.to_string(),
            d.newton_successes.to_string(),
            d.solutions.to_string(),
            fmt_time(d.wall_seconds, timings),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// `h, L2 error, L2 order, H1 error, H1 order` per level of one branch.
pub fn convergence_csv(table: &ConvergenceTable, timings: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["branch", "level", "h", "l2_err", "l2_order", "h1_err", "h1_order", "cpu_seconds"]).map_err(csv_err)?;
    for r in &table.rows {
        w.write_record([
            table.branch.to_string(),
            r.level.to_string(),
            format!("{:e}", r.h),
            fmt_num(r.l2_err),
            fmt_num(r.l2_order),
            fmt_num(r.h1_err),
            fmt_num(r.h1_order),
            fmt_time(r.cpu_seconds, timings),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// One row per (parameter value, branch); values with no branches get a
/// single row with empty branch fields.
pub fn sweep_csv(trace: &BranchTrace) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([trace.param_name.as_str(), "count", "branch", "probe_value", "sup_norm", "sign", "failure"]).map_err(csv_err)?;
    for p in &trace.points {
        let failure = p.failure.clone().unwrap_or_default();
        if p.branches.is_empty() {
            w.write_record([p.param.to_string(), p.count.to_string(), String::new(), String::new(), String::new(), String::new(), failure])
                .map_err(csv_err)?;
            continue;
        }
        for b in &p.branches {
            w.write_record([
                p.param.to_string(),
                p.count.to_string(),
                b.id.to_string(),
                format!("{:e}", b.probe_value),
                format!("{:e}", b.sup_norm),
                b.sign.name().to_string(),
                failure.clone(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}
