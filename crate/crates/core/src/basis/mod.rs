//! Orthonormal generalized polynomial chaos bases.
//!
//! A basis of total order `p` over `l` independent germs holds the
//! `K = (p+l)!/(p!·l!)` products `H_k(ξ) = Π_d φ_{i_d}(ξ_d)`, ordered graded
//! lexicographically: ascending total degree, then ascending lexicographic
//! order of the exponent tuple. The constant function is always index 0.

mod distribution;

pub use distribution::{Distribution, RandomParameter, Recurrence};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("basis size overflows for order {order} and {params} parameters")]
    Overflow { order: usize, params: usize },
    #[error("at least one random parameter is required")]
    NoParameters,
    #[error("point component {dim} = {value} lies outside the {dist} support")]
    OutsideSupport {
        dim: usize,
        value: f64,
        dist: &'static str,
    },
    #[error("point has {got} components, basis has {expected} parameters")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Exponent tuple of one multivariate basis function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&i| i == 0)
    }
}

/// Number of basis functions of total order `p` in `l` variables.
pub fn num_basis(p: usize, l: usize) -> Result<usize, BasisError> {
    if l == 0 {
        return Err(BasisError::NoParameters);
    }
    // C(p+l, p) built incrementally; each partial product is itself a binomial.
    let mut c: u128 = 1;
    for i in 1..=p as u128 {
        c = c
            .checked_mul(l as u128 + i)
            .ok_or(BasisError::Overflow { order: p, params: l })?
            / i;
    }
    usize::try_from(c).map_err(|_| BasisError::Overflow { order: p, params: l })
}

/// Total-degree index set in canonical graded-lexicographic order.
pub fn build_index_set(p: usize, l: usize) -> Result<Vec<MultiIndex>, BasisError> {
    let k = num_basis(p, l)?;
    let mut out = Vec::with_capacity(k);
    let mut cur = vec![0u32; l];
    for degree in 0..=p as u32 {
        push_compositions(degree, 0, &mut cur, &mut out);
    }
    debug_assert_eq!(out.len(), k);
    Ok(out)
}

// Emits all tuples with the given remaining sum in ascending lexicographic order.
fn push_compositions(remaining: u32, pos: usize, cur: &mut [u32], out: &mut Vec<MultiIndex>) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.push(MultiIndex(cur.to_vec()));
        return;
    }
    for v in 0..=remaining {
        cur[pos] = v;
        push_compositions(remaining - v, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// Multivariate orthonormal basis over independent germs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpcBasisSet {
    params: Vec<Distribution>,
    order: usize,
    indices: Vec<MultiIndex>,
    recurrences: Vec<Recurrence>,
}

impl GpcBasisSet {
    pub fn new(params: Vec<Distribution>, order: usize) -> Result<Self, BasisError> {
        if params.is_empty() {
            return Err(BasisError::NoParameters);
        }
        let indices = build_index_set(order, params.len())?;
        let recurrences = params
            .iter()
            .map(|d| d.recurrence(order))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GpcBasisSet {
            params,
            order,
            indices,
            recurrences,
        })
    }

    pub fn params(&self) -> &[Distribution] {
        &self.params
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of germs `l`.
    pub fn dims(&self) -> usize {
        self.params.len()
    }

    /// Number of basis functions `K`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn recurrences(&self) -> &[Recurrence] {
        &self.recurrences
    }

    pub fn check_point(&self, xi: &[f64]) -> Result<(), BasisError> {
        if xi.len() != self.params.len() {
            return Err(BasisError::DimensionMismatch {
                expected: self.params.len(),
                got: xi.len(),
            });
        }
        for (dim, (&value, dist)) in xi.iter().zip(&self.params).enumerate() {
            if !dist.contains(value) {
                return Err(BasisError::OutsideSupport {
                    dim,
                    value,
                    dist: dist.name(),
                });
            }
        }
        Ok(())
    }

    /// `H(ξ) = [H_0(ξ), …, H_{K-1}(ξ)]`.
    pub fn eval(&self, xi: &[f64]) -> Result<Vec<f64>, BasisError> {
        self.check_point(xi)?;
        let mut out = vec![0.0; self.len()];
        self.eval_unchecked(xi, &mut out);
        Ok(out)
    }

    /// Fills `out` with `H(ξ)` without support checks.
    pub fn eval_unchecked(&self, xi: &[f64], out: &mut [f64]) {
        let p1 = self.order + 1;
        let mut table = vec![0.0; p1 * self.params.len()];
        for (d, rec) in self.recurrences.iter().enumerate() {
            rec.orthonormal_into(xi[d], &mut table[d * p1..(d + 1) * p1]);
        }
        for (slot, idx) in out.iter_mut().zip(&self.indices) {
            *slot = idx
                .0
                .iter()
                .enumerate()
                .map(|(d, &i)| table[d * p1 + i as usize])
                .product();
        }
    }

    /// Evaluates `Σ_k c_k H_k(ξ)` for a scalar expansion.
    pub fn expand(&self, coeffs: &[f64], xi: &[f64]) -> Result<f64, BasisError> {
        let h = self.eval(xi)?;
        Ok(coeffs.iter().zip(&h).map(|(c, h)| c * h).sum())
    }
}

/// Mean and standard deviation from per-basis coefficient vectors.
///
/// `coeffs[k]` is the coefficient vector of basis function `k`; the mean is
/// the constant coefficient and the variance is the sum of squares of the rest.
pub fn moments_from_coeffs(coeffs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let Some(first) = coeffs.first() else {
        return (Vec::new(), Vec::new());
    };
    let mean = first.clone();
    let mut var = vec![0.0; first.len()];
    for c in &coeffs[1..] {
        for (v, x) in var.iter_mut().zip(c) {
            *v += x * x;
        }
    }
    (mean, var.into_iter().map(f64::sqrt).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn basis_counts() {
        assert_eq!(num_basis(3, 4).unwrap(), 35);
        assert_eq!(num_basis(3, 3).unwrap(), 20);
        assert_eq!(num_basis(0, 7).unwrap(), 1);
        let table2: Vec<usize> = (1..=6).map(|p| num_basis(p, 4).unwrap()).collect();
        assert_eq!(table2, vec![5, 15, 35, 70, 126, 210]);
        assert!(matches!(num_basis(2, 0), Err(BasisError::NoParameters)));
    }

    #[test]
    fn count_overflow_is_reported() {
        assert!(matches!(
            num_basis(200, 200),
            Err(BasisError::Overflow { .. })
        ));
    }

    #[test]
    fn small_index_sets() {
        let s = build_index_set(1, 2).unwrap();
        let raw: Vec<Vec<u32>> = s.into_iter().map(|m| m.0).collect();
        assert_eq!(raw, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        let s = build_index_set(2, 1).unwrap();
        let raw: Vec<Vec<u32>> = s.into_iter().map(|m| m.0).collect();
        assert_eq!(raw, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn index_set_matches_enumerate_and_filter() {
        let set = build_index_set(3, 4).unwrap();
        let mut brute = Vec::new();
        for a in 0..=3u32 {
            for b in 0..=3u32 {
                for c in 0..=3u32 {
                    for d in 0..=3u32 {
                        if a + b + c + d <= 3 {
                            brute.push(MultiIndex(vec![a, b, c, d]));
                        }
                    }
                }
            }
        }
        brute.sort_by(|x, y| x.total().cmp(&y.total()).then_with(|| x.cmp(y)));
        assert_eq!(set.len(), 35);
        assert_eq!(set, brute);
        assert!(set[0].is_zero());
        assert_eq!(set.iter().map(|m| m.total()).max(), Some(3));
        let uniq: HashSet<_> = set.iter().collect();
        assert_eq!(uniq.len(), 35);
    }

    #[test]
    fn constant_component_is_one() {
        let b = GpcBasisSet::new(
            vec![
                Distribution::Gaussian,
                Distribution::Uniform,
                Distribution::Gamma { shape: 2.0 },
                Distribution::Beta { alpha: 2.0, beta: 3.0 },
            ],
            3,
        )
        .unwrap();
        let h = b.eval(&[0.3, -0.7, 1.9, 0.2]).unwrap();
        assert_eq!(h[0], 1.0);
        assert_eq!(h.len(), 35);
    }

    #[test]
    fn gaussian_degree_values() {
        let b = GpcBasisSet::new(vec![Distribution::Gaussian], 2).unwrap();
        assert_eq!(b.eval(&[2.0]).unwrap()[1], 2.0);
        assert!(b.eval(&[1.0]).unwrap()[2].abs() < 1e-15);
        assert!(b.eval(&[-1.0]).unwrap()[2].abs() < 1e-15);
    }

    #[test]
    fn support_violations() {
        let b = GpcBasisSet::new(vec![Distribution::Uniform, Distribution::Beta { alpha: 2.0, beta: 2.0 }], 2)
            .unwrap();
        assert!(matches!(
            b.eval(&[1.5, 0.5]),
            Err(BasisError::OutsideSupport { dim: 0, .. })
        ));
        assert!(matches!(
            b.eval(&[0.0, -0.1]),
            Err(BasisError::OutsideSupport { dim: 1, .. })
        ));
        assert!(matches!(
            b.eval(&[0.0]),
            Err(BasisError::DimensionMismatch { .. })
        ));
        let g = GpcBasisSet::new(vec![Distribution::Gamma { shape: 1.0 }], 1).unwrap();
        assert!(g.eval(&[-0.5]).is_err());
    }

    #[test]
    fn moments_trivial_cases() {
        let (m, s) = moments_from_coeffs(&[vec![2.5], vec![0.0], vec![0.0]]);
        assert_eq!((m[0], s[0]), (2.5, 0.0));
        let (m, s) = moments_from_coeffs(&[vec![0.0], vec![1.0], vec![0.0]]);
        assert_eq!((m[0], s[0]), (0.0, 1.0));
        let (m, s) = moments_from_coeffs(&[vec![1.0, 0.0], vec![3.0, 0.0], vec![4.0, 1.0]]);
        assert_eq!(m, vec![1.0, 0.0]);
        assert_eq!(s, vec![5.0, 1.0]);
    }

    #[test]
    fn moments_match_direct_sampling() {
        use rand::SeedableRng;
        let basis = GpcBasisSet::new(
            vec![Distribution::Gaussian, Distribution::Beta { alpha: 2.0, beta: 3.0 }],
            2,
        )
        .unwrap();
        let coeffs = [0.7, -0.3, 0.25, 0.1, -0.05, 0.4];
        let (mean, std) = moments_from_coeffs(&coeffs.iter().map(|&c| vec![c]).collect::<Vec<_>>());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        let mut xi = [0.0; 2];
        let mut h = vec![0.0; basis.len()];
        for _ in 0..n {
            for (x, d) in xi.iter_mut().zip(basis.params()) {
                *x = d.sample(&mut rng);
            }
            basis.eval_unchecked(&xi, &mut h);
            let y: f64 = coeffs.iter().zip(&h).map(|(c, h)| c * h).sum();
            s1 += y;
            s2 += y * y;
        }
        let m = s1 / n as f64;
        let sd = (s2 / n as f64 - m * m).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!((m - mean[0]).abs() < 3.0 * se, "mean {m} vs {}", mean[0]);
        // Standard error of the sample standard deviation is roughly sd/√(2n).
        assert!((sd - std[0]).abs() < 3.0 * 2.0 * sd / (2.0 * n as f64).sqrt(), "std {sd} vs {}", std[0]);
    }

    #[test]
    fn ordering_is_stable() {
        let a = build_index_set(4, 3).unwrap();
        let b = build_index_set(4, 3).unwrap();
        assert_eq!(a, b);
    }
}
