//! Cost comparison across runs of one netlist and analysis.
//!
//! Ratios are taken against the stochastic-testing run when one is present,
//! otherwise against the first manifest. `node_ratio` is the node-count
//! speedup `ν`, `time_ratio` the measured one, and `kappa` their quotient.
//! For transient runs `kappa_steps` compares time-step counts directly.

use std::fmt::Write as _;

use gpcsim_core::uq::Method;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Manifest;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("no manifests given")]
    Empty,
    #[error("manifests differ in {field}: `{a}` vs `{b}`")]
    Mismatch { field: &'static str, a: String, b: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub method: Method,
    pub order: usize,
    pub basis_size: usize,
    pub nodes: usize,
    pub wall_time_s: f64,
    pub time_steps: usize,
    pub node_ratio: f64,
    pub time_ratio: f64,
    pub kappa: f64,
    pub kappa_steps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub netlist: String,
    pub analysis: String,
    pub reference: Method,
    pub rows: Vec<CostRow>,
}

pub fn report_costs(manifests: &[Manifest]) -> Result<CostTable, ReportError> {
    let first = manifests.first().ok_or(ReportError::Empty)?;
    for m in &manifests[1..] {
        if m.netlist_sha256 != first.netlist_sha256 {
            return Err(ReportError::Mismatch {
                field: "netlist",
                a: first.netlist.clone(),
                b: m.netlist.clone(),
            });
        }
        if m.analysis != first.analysis {
            return Err(ReportError::Mismatch {
                field: "analysis",
                a: first.analysis.clone(),
                b: m.analysis.clone(),
            });
        }
    }
    let reference = manifests.iter().find(|m| m.method == Method::St).unwrap_or(first);
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::NAN };
    let rows = manifests
        .iter()
        .map(|m| {
            let node_ratio = ratio(m.nodes as f64, reference.nodes as f64);
            let time_ratio = ratio(m.wall_time_s, reference.wall_time_s);
            CostRow {
                method: m.method,
                order: m.order,
                basis_size: m.basis_size,
                nodes: m.nodes,
                wall_time_s: m.wall_time_s,
                time_steps: m.time_steps,
                node_ratio,
                time_ratio,
                kappa: time_ratio / node_ratio,
                kappa_steps: (m.time_steps > 0 && reference.time_steps > 0)
                    .then(|| m.time_steps as f64 / reference.time_steps as f64),
            }
        })
        .collect();
    Ok(CostTable {
        netlist: first.netlist.clone(),
        analysis: first.analysis.clone(),
        reference: reference.method,
        rows,
    })
}

impl CostTable {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "netlist {}  analysis {}  reference {}", self.netlist, self.analysis, self.reference);
        let _ = writeln!(
            out,
            "{:<6} {:>5} {:>6} {:>8} {:>12} {:>8} {:>10} {:>10} {:>8} {:>10}",
            "method", "order", "K", "nodes", "time [s]", "steps", "nu", "time x", "kappa", "kappa_stp"
        );
        for r in &self.rows {
            let ks = r.kappa_steps.map_or_else(|| "-".to_string(), |k| format!("{k:.3}"));
            let _ = writeln!(
                out,
                "{:<6} {:>5} {:>6} {:>8} {:>12.4e} {:>8} {:>10.4} {:>10.4} {:>8.3} {:>10}",
                r.method.to_string(),
                r.order,
                r.basis_size,
                r.nodes,
                r.wall_time_s,
                r.time_steps,
                r.node_ratio,
                r.time_ratio,
                r.kappa,
                ks
            );
        }
        out
    }
}
