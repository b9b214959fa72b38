use std::path::Path;

use gpcsim_core::uq::Method;
use gpcsim_core::Scheme;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// What one run did and what it cost. Every ratio in a cost report can be
/// recomputed from these fields alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub netlist: String,
    pub netlist_sha256: String,
    pub analysis: String,
    pub method: Method,
    pub order: usize,
    pub germs: usize,
    /// Number of basis functions `K`; zero for Monte Carlo.
    pub basis_size: usize,
    /// Deterministic evaluation points: testing nodes, quadrature nodes or samples.
    pub nodes: usize,
    pub cond_phi: Option<f64>,
    pub beta: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub failures: usize,
    pub scheme: Scheme,
    pub lte_tol: f64,
    pub abstol: f64,
    pub reltol: f64,
    pub t_stop: Option<f64>,
    pub fixed_step: Option<f64>,
    pub grid_points: usize,
    /// Time steps of one run; zero for DC analyses.
    pub time_steps: usize,
    pub wall_time_s: f64,
    pub newton_iters: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_lte_ratio: f64,
}

/// Lowercase hex SHA-256 of the netlist text.
pub fn netlist_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Manifest {
    pub fn read(path: &Path) -> std::io::Result<Manifest> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_text() {
        assert_eq!(
            netlist_digest(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
