//! Gauss quadrature rules and tensor-product grids.
//!
//! One-dimensional rules come from the eigen-decomposition of the symmetric
//! Jacobi matrix of the family's recurrence (Golub–Welsch). A [`TensorGrid`]
//! never stores its nodes: node `j` is rebuilt from `j` through the mixed-radix
//! index map
//!
//! ```text
//! j = Σ_k n̂^(k-1) · I(k, j)        (zero-based, dimension 1 varies fastest)
//! ```
//!
//! and its weight is the product of the per-dimension weights.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{BasisError, Distribution};

/// Default cap on the number of nodes a grid will enumerate eagerly.
pub const DEFAULT_ENUMERATION_BUDGET: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature rule needs at least one point")]
    Empty,
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("eigen-solve for the {dist} rule with {points} points did not converge")]
    NoConvergence { dist: &'static str, points: usize },
    #[error("tensor grid rules disagree on point count ({0} vs {1})")]
    MixedPointCounts(usize, usize),
    #[error("tensor grid needs at least one dimension")]
    NoDimensions,
    #[error("tensor grid size overflows: {points}^{dims}")]
    Overflow { points: usize, dims: usize },
    #[error("grid has {total} nodes, above the enumeration budget of {budget}; use streamed node access instead")]
    OverBudget { total: usize, budget: usize },
    #[error("integrand failed at node {index}: {message}")]
    Integrand { index: usize, message: String },
}

/// Gauss rule for one germ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule1D {
    pub dist: Distribution,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// `n`-point Gauss rule for `dist`, nodes ascending.
pub fn gauss_rule(dist: Distribution, n: usize) -> Result<QuadratureRule1D, QuadratureError> {
    if n == 0 {
        return Err(QuadratureError::Empty);
    }
    let rec = dist.recurrence(n)?;
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jacobi[(i, i)] = rec.a[i];
        if i + 1 < n {
            let off = rec.b[i + 1].sqrt();
            jacobi[(i, i + 1)] = off;
            jacobi[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::try_new(jacobi, f64::EPSILON, 10_000).ok_or(
        QuadratureError::NoConvergence {
            dist: dist.name(),
            points: n,
        },
    )?;
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();

    if dist.is_symmetric() {
        // Mirror-image nodes share bit-identical weights so weight ties are exact.
        let center = dist.mean();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let half = 0.5 * ((center - nodes[i]) + (nodes[j] - center));
            nodes[i] = center - half;
            nodes[j] = center + half;
            let w = 0.5 * (weights[i] + weights[j]);
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = center;
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(QuadratureRule1D {
        dist,
        nodes,
        weights,
    })
}

/// Lazily indexed tensor product of equal-size 1-D rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorGrid {
    rules: Vec<QuadratureRule1D>,
    points: usize,
    total: usize,
    budget: usize,
}

impl TensorGrid {
    pub fn new(rules: Vec<QuadratureRule1D>) -> Result<Self, QuadratureError> {
        let first = rules.first().ok_or(QuadratureError::NoDimensions)?;
        let points = first.len();
        if points == 0 {
            return Err(QuadratureError::Empty);
        }
        if let Some(r) = rules.iter().find(|r| r.len() != points) {
            return Err(QuadratureError::MixedPointCounts(points, r.len()));
        }
        let dims = rules.len();
        let total = u32::try_from(dims)
            .ok()
            .and_then(|d| points.checked_pow(d))
            .ok_or(QuadratureError::Overflow { points, dims })?;
        Ok(TensorGrid {
            rules,
            points,
            total,
            budget: DEFAULT_ENUMERATION_BUDGET,
        })
    }

    /// Grid of `n`-point Gauss rules, one per distribution.
    pub fn gauss(dists: &[Distribution], n: usize) -> Result<Self, QuadratureError> {
        let rules = dists
            .iter()
            .map(|&d| gauss_rule(d, n))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(rules)
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn rules(&self) -> &[QuadratureRule1D] {
        &self.rules
    }

    pub fn dims(&self) -> usize {
        self.rules.len()
    }

    /// Points per dimension `n̂`.
    pub fn points_per_dim(&self) -> usize {
        self.points
    }

    /// `N̂ = n̂^l`.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Column `j` of the index matrix (zero-based per-dimension point indices).
    pub fn index_column(&self, j: usize) -> Vec<usize> {
        debug_assert!(j < self.total);
        let mut rest = j;
        (0..self.dims())
            .map(|_| {
                let d = rest % self.points;
                rest /= self.points;
                d
            })
            .collect()
    }

    /// Inverse of [`index_column`](Self::index_column).
    pub fn column_of(&self, digits: &[usize]) -> usize {
        digits.iter().rev().fold(0, |acc, &d| acc * self.points + d)
    }

    pub fn node(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dims()];
        self.node_into(j, &mut out);
        out
    }

    pub fn node_into(&self, j: usize, out: &mut [f64]) {
        let mut rest = j;
        for (slot, rule) in out.iter_mut().zip(&self.rules) {
            *slot = rule.nodes[rest % self.points];
            rest /= self.points;
        }
    }

    pub fn weight(&self, j: usize) -> f64 {
        let digits = self.index_column(j);
        self.weight_of_digits(&digits)
    }

    fn weight_of_digits(&self, digits: &[usize]) -> f64 {
        // Multiplying sorted factors makes the product independent of which
        // dimension each factor came from, so permuted ties compare equal.
        let mut factors: Vec<f64> = digits
            .iter()
            .zip(&self.rules)
            .map(|(&d, r)| r.weights[d])
            .collect();
        factors.sort_by(f64::total_cmp);
        factors.iter().product()
    }

    fn check_budget(&self) -> Result<(), QuadratureError> {
        if self.total > self.budget {
            Err(QuadratureError::OverBudget {
                total: self.total,
                budget: self.budget,
            })
        } else {
            Ok(())
        }
    }

    /// All nodes and weights in index order; subject to the enumeration budget.
    pub fn enumerate(&self) -> Result<Vec<(Vec<f64>, f64)>, QuadratureError> {
        self.check_budget()?;
        Ok((0..self.total).map(|j| (self.node(j), self.weight(j))).collect())
    }

    /// Node indices in descending weight order, ties by ascending index.
    /// Runs best-first over the per-dimension sorted weights, so only the
    /// visited frontier is ever held in memory.
    pub fn by_descending_weight(&self) -> DescendingWeights<'_> {
        DescendingWeights::new(self)
    }

    /// `Σ_j w^j g(ξ_j)`, evaluated in parallel and summed in index order.
    pub fn integrate<G, E>(&self, g: G) -> Result<Vec<f64>, QuadratureError>
    where
        G: Fn(&[f64]) -> Result<Vec<f64>, E> + Sync,
        E: std::fmt::Display,
    {
        self.check_budget()?;
        let values: Vec<Vec<f64>> = (0..self.total)
            .into_par_iter()
            .map(|j| {
                let node = self.node(j);
                g(&node).map_err(|e| QuadratureError::Integrand {
                    index: j,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
        let mut acc = vec![0.0; values.first().map_or(0, Vec::len)];
        for (j, v) in values.iter().enumerate() {
            let w = self.weight(j);
            for (a, x) in acc.iter_mut().zip(v) {
                *a += w * x;
            }
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone)]
struct Frontier {
    weight: f64,
    index: usize,
    ranks: Vec<usize>,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    // Max-heap: larger weight first, then smaller linear index.
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Iterator over `(index, weight)` in descending weight order.
pub struct DescendingWeights<'a> {
    grid: &'a TensorGrid,
    // Per dimension: point indices sorted by descending weight, ties ascending.
    order: Vec<Vec<usize>>,
    heap: BinaryHeap<Frontier>,
    ready: std::vec::IntoIter<(usize, f64)>,
}

impl<'a> DescendingWeights<'a> {
    fn new(grid: &'a TensorGrid) -> Self {
        let order: Vec<Vec<usize>> = grid
            .rules
            .iter()
            .map(|r| {
                let mut idx: Vec<usize> = (0..r.len()).collect();
                idx.sort_by(|&a, &b| r.weights[b].total_cmp(&r.weights[a]).then(a.cmp(&b)));
                idx
            })
            .collect();
        let mut it = DescendingWeights {
            grid,
            order,
            heap: BinaryHeap::new(),
            ready: Vec::new().into_iter(),
        };
        let root = vec![0; grid.dims()];
        let f = it.frontier(root);
        it.heap.push(f);
        it
    }

    fn frontier(&self, ranks: Vec<usize>) -> Frontier {
        let digits: Vec<usize> = ranks.iter().zip(&self.order).map(|(&r, o)| o[r]).collect();
        Frontier {
            weight: self.grid.weight_of_digits(&digits),
            index: self.grid.column_of(&digits),
            ranks,
        }
    }

    // Each rank tuple has a unique parent (its last non-zero rank decremented),
    // so children are generated without duplicates.
    fn push_children(&mut self, ranks: &[usize]) {
        let last = ranks.iter().rposition(|&r| r > 0).unwrap_or(0);
        for k in last..ranks.len() {
            if ranks[k] + 1 < self.grid.points {
                let mut child = ranks.to_vec();
                child[k] += 1;
                let f = self.frontier(child);
                self.heap.push(f);
            }
        }
    }
}

impl Iterator for DescendingWeights<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(item) = self.ready.next() {
            return Some(item);
        }
        let top = self.heap.pop()?;
        let w = top.weight;
        let mut tied = vec![(top.index, w)];
        self.push_children(&top.ranks);
        // Children never outweigh their parent, so draining equal weights here
        // collects the whole tie class before it is released in index order.
        while self.heap.peek().is_some_and(|f| f.weight == w) {
            let f = self.heap.pop().expect("peeked");
            tied.push((f.index, f.weight));
            self.push_children(&f.ranks);
        }
        tied.sort_by_key(|t| t.0);
        self.ready = tied.into_iter();
        self.ready.next()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_families() -> Vec<Distribution> {
        vec![
            Distribution::Gaussian,
            Distribution::Uniform,
            Distribution::Gamma { shape: 1.0 },
            Distribution::Gamma { shape: 3.5 },
            Distribution::Beta { alpha: 2.0, beta: 3.0 },
            Distribution::Beta { alpha: 2.0, beta: 2.0 },
        ]
    }

    // Exact moments E[ξ^d] used as the moment-matching oracle.
    fn moment(dist: Distribution, d: u32) -> f64 {
        match dist {
            Distribution::Gaussian => {
                if d % 2 == 1 {
                    0.0
                } else {
                    (1..d).step_by(2).map(f64::from).product()
                }
            }
            Distribution::Uniform => {
                if d % 2 == 1 {
                    0.0
                } else {
                    1.0 / (f64::from(d) + 1.0)
                }
            }
            Distribution::Gamma { shape } => (0..d).map(|i| shape + f64::from(i)).product(),
            Distribution::Beta { alpha, beta } => (0..d)
                .map(|i| (alpha + f64::from(i)) / (alpha + beta + f64::from(i)))
                .product(),
        }
    }

    #[test]
    fn two_point_rules() {
        let g = gauss_rule(Distribution::Gaussian, 2).unwrap();
        assert!((g.nodes[0] + 1.0).abs() < 1e-14 && (g.nodes[1] - 1.0).abs() < 1e-14);
        assert!(g.weights.iter().all(|w| (w - 0.5).abs() < 1e-14));

        let u = gauss_rule(Distribution::Uniform, 2).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((u.nodes[0] + r).abs() < 1e-14 && (u.nodes[1] - r).abs() < 1e-14);
        assert!(u.weights.iter().all(|w| (w - 0.5).abs() < 1e-14));

        let l = gauss_rule(Distribution::Gamma { shape: 1.0 }, 2).unwrap();
        let s2 = 2f64.sqrt();
        assert!((l.nodes[0] - (2.0 - s2)).abs() < 1e-13);
        assert!((l.nodes[1] - (2.0 + s2)).abs() < 1e-13);
        assert!((l.weights[0] - (2.0 + s2) / 4.0).abs() < 1e-13);
        assert!((l.weights[1] - (2.0 - s2) / 4.0).abs() < 1e-13);
    }

    #[test]
    fn rules_match_moments() {
        for dist in all_families() {
            for n in 1..=8 {
                let rule = gauss_rule(dist, n).unwrap();
                assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(rule.weights.iter().all(|&w| w > 0.0));
                for d in 0..(2 * n as u32) {
                    let exact = moment(dist, d);
                    let got = rule.integrate(|x| x.powi(d as i32));
                    let tol = 1e-10 * exact.abs().max(1.0);
                    assert!((got - exact).abs() < tol, "{dist:?} n={n} d={d}: {got} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn one_point_rule_is_the_mean() {
        for dist in all_families() {
            let r = gauss_rule(dist, 1).unwrap();
            assert!((r.nodes[0] - dist.mean()).abs() < 1e-14);
            assert_eq!(r.weights, vec![1.0]);
        }
    }

    #[test]
    fn zero_points_rejected() {
        assert_eq!(gauss_rule(Distribution::Gaussian, 0), Err(QuadratureError::Empty));
    }

    #[test]
    fn grid_sizes() {
        let g = TensorGrid::gauss(&[Distribution::Gaussian; 2], 4).unwrap();
        assert_eq!(g.total(), 16);
        let g = TensorGrid::gauss(&[Distribution::Uniform; 3], 4).unwrap();
        assert_eq!(g.total(), 64);
        let g = TensorGrid::gauss(&[Distribution::Gaussian; 4], 4).unwrap();
        assert_eq!(g.total(), 256);
    }

    #[test]
    fn index_round_trip_and_weights() {
        let dists = [
            Distribution::Gaussian,
            Distribution::Gamma { shape: 2.0 },
            Distribution::Beta { alpha: 2.0, beta: 3.0 },
        ];
        let g = TensorGrid::gauss(&dists, 3).unwrap();
        for j in 0..g.total() {
            let col = g.index_column(j);
            assert_eq!(g.column_of(&col), j);
            // The zero-based form of the mixed-radix relation.
            let rebuilt: usize = col.iter().enumerate().map(|(k, &i)| 3usize.pow(k as u32) * i).sum();
            assert_eq!(rebuilt, j);
            let w: f64 = col.iter().zip(g.rules()).map(|(&i, r)| r.weights[i]).product();
            assert!((g.weight(j) - w).abs() < 1e-16);
            assert!(g.weight(j) > 0.0);
        }
    }

    #[test]
    fn integrate_examples() {
        let g = TensorGrid::gauss(&[Distribution::Gaussian; 2], 3).unwrap();
        let one = g.integrate(|_| Ok::<_, String>(vec![1.0])).unwrap();
        assert!((one[0] - 1.0).abs() < 1e-14);
        let m = g
            .integrate(|x| Ok::<_, String>(vec![x[0] * x[0] * x[1] * x[1]]))
            .unwrap();
        assert!((m[0] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn integrate_reports_failing_node() {
        let g = TensorGrid::gauss(&[Distribution::Uniform], 3).unwrap();
        let err = g
            .integrate(|x| if x[0] > 0.5 { Err("boom") } else { Ok(vec![0.0]) })
            .unwrap_err();
        assert_eq!(
            err,
            QuadratureError::Integrand {
                index: 2,
                message: "boom".into()
            }
        );
    }

    #[test]
    fn budget_blocks_enumeration() {
        let g = TensorGrid::gauss(&[Distribution::Gaussian; 4], 5)
            .unwrap()
            .with_budget(100);
        assert!(matches!(g.enumerate(), Err(QuadratureError::OverBudget { total: 625, budget: 100 })));
        // Streamed access still works.
        assert_eq!(g.node(624).len(), 4);
        assert_eq!(g.by_descending_weight().count(), 625);
    }

    #[test]
    fn descending_order_matches_full_sort() {
        let cases: Vec<Vec<Distribution>> = vec![
            vec![Distribution::Gaussian; 3],
            vec![
                Distribution::Gaussian,
                Distribution::Beta { alpha: 2.0, beta: 5.0 },
                Distribution::Gamma { shape: 1.5 },
                Distribution::Uniform,
            ],
            vec![Distribution::Uniform; 2],
        ];
        for dists in cases {
            for n in 1..=5 {
                let g = TensorGrid::gauss(&dists, n).unwrap();
                let mut brute: Vec<(usize, f64)> = (0..g.total()).map(|j| (j, g.weight(j))).collect();
                brute.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                let streamed: Vec<(usize, f64)> = g.by_descending_weight().collect();
                assert_eq!(streamed, brute, "{dists:?} n={n}");
            }
        }
    }

    #[test]
    fn mixed_point_counts_rejected() {
        let a = gauss_rule(Distribution::Gaussian, 2).unwrap();
        let b = gauss_rule(Distribution::Gaussian, 3).unwrap();
        assert!(matches!(
            TensorGrid::new(vec![a, b]),
            Err(QuadratureError::MixedPointCounts(2, 3))
        ));
        assert!(matches!(TensorGrid::new(vec![]), Err(QuadratureError::NoDimensions)));
    }
}
