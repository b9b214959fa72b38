//! Testing-node selection for stochastic testing.
//!
//! Candidates are the `(p+1)^l` tensor Gauss nodes, visited from the heaviest
//! weight down (ties broken by ascending candidate index). A candidate is kept
//! when the part of its basis vector `H(ξ)` orthogonal to the span of the
//! already kept vectors is large enough:
//!
//! ```text
//! v = H(ξ) − V Vᵀ H(ξ),   keep iff ‖v‖ / ‖H(ξ)‖ > β
//! ```
//!
//! The first candidate is always kept. Selection stops at `K` nodes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{num_basis, BasisError, GpcBasisSet};
use crate::linalg::inverse_with_cond;
use crate::quadrature::{QuadratureError, TensorGrid};

/// Default orthogonality threshold.
pub const DEFAULT_BETA: f64 = 1e-2;
/// Number of times β is halved after a failed scan.
pub const MAX_BETA_HALVINGS: usize = 6;
/// Collocation matrices with a larger 1-norm condition number count as singular.
pub const MAX_PHI_CONDITION: f64 = 1e13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("threshold beta must lie in (0, 1), got {0}")]
    InvalidBeta(f64),
    #[error("only {reached} of {needed} testing nodes accepted (beta = {beta})")]
    Exhausted {
        reached: usize,
        needed: usize,
        beta: f64,
    },
    #[error("collocation matrix is numerically singular (cond ≈ {cond:e})")]
    Singular { cond: f64 },
    #[error("candidate grid has {grid} dimensions, basis has {basis}")]
    DimensionMismatch { grid: usize, basis: usize },
    #[error("expected {expected} nodes, got {got}")]
    WrongNodeCount { expected: usize, got: usize },
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// The `K` selected nodes with the collocation matrix `Φ(m,k) = H_k(ξᵐ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestingNodeSet {
    pub nodes: Vec<Vec<f64>>,
    /// Candidate-grid index of each node; empty for hand-built sets.
    pub grid_indices: Vec<usize>,
    pub phi: DMatrix<f64>,
    pub phi_inv: DMatrix<f64>,
    pub cond_estimate: f64,
    pub beta_used: f64,
}

impl TestingNodeSet {
    /// Selects from the `(p+1)`-point tensor Gauss grid of `basis`.
    pub fn for_basis(basis: &GpcBasisSet, beta: f64) -> Result<Self, SelectionError> {
        let grid = TensorGrid::gauss(basis.params(), basis.order() + 1)?;
        select_testing_nodes(basis, &grid, beta)
    }

    /// Builds the set from explicit nodes (no grid provenance).
    pub fn from_nodes(basis: &GpcBasisSet, nodes: Vec<Vec<f64>>) -> Result<Self, SelectionError> {
        let (phi, phi_inv, cond) = build_phi(basis, &nodes)?;
        Ok(TestingNodeSet {
            nodes,
            grid_indices: Vec::new(),
            phi,
            phi_inv,
            cond_estimate: cond,
            beta_used: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Selection with the retry policy: on exhaustion β is halved and the scan
/// repeated, up to [`MAX_BETA_HALVINGS`] times.
pub fn select_testing_nodes(
    basis: &GpcBasisSet,
    grid: &TensorGrid,
    beta: f64,
) -> Result<TestingNodeSet, SelectionError> {
    let mut b = beta;
    let mut last = None;
    for _ in 0..=MAX_BETA_HALVINGS {
        match select_once(basis, grid, b) {
            Err(e @ SelectionError::Exhausted { .. }) => {
                last = Some(e);
                b *= 0.5;
            }
            other => return other,
        }
    }
    Err(last.expect("at least one attempt"))
}

/// One greedy scan with a fixed β.
pub fn select_once(
    basis: &GpcBasisSet,
    grid: &TensorGrid,
    beta: f64,
) -> Result<TestingNodeSet, SelectionError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SelectionError::InvalidBeta(beta));
    }
    if grid.dims() != basis.dims() {
        return Err(SelectionError::DimensionMismatch {
            grid: grid.dims(),
            basis: basis.dims(),
        });
    }
    let k = basis.len();
    let mut span: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut picked = Vec::with_capacity(k);
    let mut xi = vec![0.0; basis.dims()];
    let mut h = vec![0.0; k];

    for (j, _w) in grid.by_descending_weight() {
        grid.node_into(j, &mut xi);
        basis.eval_unchecked(&xi, &mut h);
        let h_norm = norm2(&h);
        if h_norm == 0.0 {
            continue;
        }
        let mut v = h.clone();
        // Classical Gram–Schmidt applied twice keeps the span orthonormal.
        for _ in 0..2 {
            for q in &span {
                let c = dot(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
        }
        let v_norm = norm2(&v);
        if span.is_empty() || v_norm / h_norm > beta {
            for vi in &mut v {
                *vi /= v_norm;
            }
            span.push(v);
            picked.push(j);
            if picked.len() == k {
                break;
            }
        }
    }
    if picked.len() < k {
        return Err(SelectionError::Exhausted {
            reached: picked.len(),
            needed: k,
            beta,
        });
    }
    let nodes: Vec<Vec<f64>> = picked.iter().map(|&j| grid.node(j)).collect();
    let (phi, phi_inv, cond) = build_phi(basis, &nodes)?;
    Ok(TestingNodeSet {
        nodes,
        grid_indices: picked,
        phi,
        phi_inv,
        cond_estimate: cond,
        beta_used: beta,
    })
}

/// `Φ`, `Φ⁻¹` and the 1-norm condition number of `Φ`.
pub fn build_phi(
    basis: &GpcBasisSet,
    nodes: &[Vec<f64>],
) -> Result<(DMatrix<f64>, DMatrix<f64>, f64), SelectionError> {
    let k = basis.len();
    if nodes.len() != k {
        return Err(SelectionError::WrongNodeCount {
            expected: k,
            got: nodes.len(),
        });
    }
    let mut phi = DMatrix::zeros(k, k);
    for (m, xi) in nodes.iter().enumerate() {
        let h = basis.eval(xi)?;
        for (c, v) in h.into_iter().enumerate() {
            phi[(m, c)] = v;
        }
    }
    match inverse_with_cond(&phi) {
        Some((inv, cond)) if cond <= MAX_PHI_CONDITION => Ok((phi, inv, cond)),
        Some((_, cond)) => Err(SelectionError::Singular { cond }),
        None => Err(SelectionError::Singular {
            cond: f64::INFINITY,
        }),
    }
}

/// Estimated node count of a level-(p+1) nested sparse grid:
/// `Σ_{i=0..p} 2^i · C(l-1+i, i)`.
pub fn sparse_grid_count(p: usize, l: usize) -> Result<u128, BasisError> {
    if l == 0 {
        return Err(BasisError::NoParameters);
    }
    let overflow = BasisError::Overflow { order: p, params: l };
    let mut total: u128 = 0;
    // Running binomial C(l-1+i, i).
    let mut c: u128 = 1;
    for i in 0..=p {
        if i > 0 {
            c = c
                .checked_mul((l - 1 + i) as u128)
                .ok_or_else(|| overflow.clone())?
                / i as u128;
        }
        let term = 1u128
            .checked_shl(i as u32)
            .filter(|_| i < 127)
            .and_then(|pow| pow.checked_mul(c))
            .ok_or_else(|| overflow.clone())?;
        total = total.checked_add(term).ok_or_else(|| overflow.clone())?;
    }
    Ok(total)
}

/// Tensor-product or sparse-grid collocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScKind {
    TensorProduct,
    SparseGrid,
}

/// Node-count speedup `N_SC / K` of stochastic testing over collocation.
pub fn speedup_model(p: usize, l: usize, kind: ScKind) -> Result<f64, BasisError> {
    let k = num_basis(p, l)? as f64;
    let n_sc = match kind {
        ScKind::TensorProduct => ((p + 1) as f64).powi(l as i32),
        ScKind::SparseGrid => sparse_grid_count(p, l)? as f64,
    };
    Ok(n_sc / k)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
