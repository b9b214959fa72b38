//! Statistics, histograms, method comparisons and exports.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::GpcBasisSet;
use crate::testing_nodes::TestingNodeSet;
use crate::uq::{Axis, GpcTrajectory, Method, SampleEnsemble};

#[derive(Debug, Error)]
pub enum PostError {
    #[error("cannot compare: {0}")]
    Mismatch(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Mean and standard deviation of every state along the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSeries {
    pub grid: Vec<f64>,
    pub names: Vec<String>,
    /// `mean[g][state]`.
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
    /// Standard error of the mean, for Monte Carlo ensembles.
    pub stderr: Option<Vec<Vec<f64>>>,
}

impl StatSeries {
    pub fn state(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn mean_of(&self, state: usize) -> Vec<f64> {
        self.mean.iter().map(|m| m[state]).collect()
    }

    pub fn std_of(&self, state: usize) -> Vec<f64> {
        self.std.iter().map(|s| s[state]).collect()
    }
}

pub fn stats_over_time(traj: &GpcTrajectory, names: &[String]) -> StatSeries {
    let (mean, std) = (0..traj.len()).map(|g| traj.state(g).moments()).unzip();
    StatSeries {
        grid: traj.grid.clone(),
        names: names.to_vec(),
        mean,
        std,
        stderr: None,
    }
}

pub fn stats_of_ensemble(ens: &SampleEnsemble, names: &[String]) -> StatSeries {
    let n = names.len();
    let mut mean = Vec::with_capacity(ens.grid.len());
    let mut std = Vec::with_capacity(ens.grid.len());
    let mut se = Vec::with_capacity(ens.grid.len());
    for g in 0..ens.grid.len() {
        let (m, s, e): (Vec<f64>, Vec<f64>, Vec<f64>) = (0..n).map(|i| ens.moments(g, i)).fold(
            (Vec::new(), Vec::new(), Vec::new()),
            |(mut a, mut b, mut c), (x, y, z)| {
                a.push(x);
                b.push(y);
                c.push(z);
                (a, b, c)
            },
        );
        mean.push(m);
        std.push(s);
        se.push(e);
    }
    StatSeries {
        grid: ens.grid.clone(),
        names: names.to_vec(),
        mean,
        std,
        stderr: (ens.method == Method::Mc).then_some(se),
    }
}

/// Long-format CSV `time,state,mean,std` at 17 significant digits.
pub fn write_stats_csv<W: Write>(series: &StatSeries, mut out: W) -> Result<(), PostError> {
    writeln!(out, "time,state,mean,std")?;
    for (g, t) in series.grid.iter().enumerate() {
        for (i, name) in series.names.iter().enumerate() {
            writeln!(out, "{t:.16e},{name},{:.16e},{:.16e}", series.mean[g][i], series.std[g][i])?;
        }
    }
    Ok(())
}

/// Reads what [`write_stats_csv`] writes. Rows must be grouped by time with
/// the states in the same order at every time.
pub fn read_stats_csv<R: BufRead>(input: R) -> Result<StatSeries, PostError> {
    let mut series = StatSeries {
        grid: Vec::new(),
        names: Vec::new(),
        mean: Vec::new(),
        std: Vec::new(),
        stderr: None,
    };
    let bad = |line: usize, message: &str| PostError::Csv {
        line,
        message: message.to_string(),
    };
    let mut lines = input.lines().enumerate();
    let header = lines.next().map(|(_, h)| h).transpose()?;
    if header.as_deref().map(str::trim) != Some("time,state,mean,std") {
        return Err(bad(1, "expected header time,state,mean,std"));
    }
    let mut first_block = true;
    let mut col = 0;
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(bad(lineno, "expected four fields"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(lineno, "bad number"));
        let (t, name, m, s) = (num(parts[0])?, parts[1], num(parts[2])?, num(parts[3])?);
        if series.grid.last() != Some(&t) {
            if !series.grid.is_empty() {
                first_block = false;
                if col != series.names.len() {
                    return Err(bad(lineno, "time block has a different number of states"));
                }
            }
            series.grid.push(t);
            series.mean.push(Vec::new());
            series.std.push(Vec::new());
            col = 0;
        }
        if first_block {
            series.names.push(name.to_string());
        } else if series.names.get(col).map(String::as_str) != Some(name) {
            return Err(bad(lineno, "state order differs from the first time block"));
        }
        series.mean.last_mut().unwrap().push(m);
        series.std.last_mut().unwrap().push(s);
        col += 1;
    }
    Ok(series)
}

/// Histogram bin rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Binning {
    #[default]
    FreedmanDiaconis,
    Count(usize),
}

/// A normalized histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfEstimate {
    pub label: String,
    pub samples: usize,
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl PdfEstimate {
    /// `Σ density·width`; one up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn histogram(label: &str, values: &[f64], binning: Binning) -> PdfEstimate {
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / n.max(1) as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    let (lo, hi) = (sorted.first().copied().unwrap_or(0.0), sorted.last().copied().unwrap_or(0.0));
    let span = hi - lo;
    if n == 0 || span <= f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
        // A point mass: one narrow bin around the value.
        let w = 1e-9 * lo.abs().max(1.0);
        return PdfEstimate {
            label: label.to_string(),
            samples: n,
            edges: vec![lo - 0.5 * w, lo + 0.5 * w],
            densities: vec![if n == 0 { 0.0 } else { 1.0 / w }],
            mean,
            std: 0.0,
        };
    }
    let bins = match binning {
        Binning::Count(b) => b.max(1),
        Binning::FreedmanDiaconis => {
            let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
            let width = 2.0 * iqr / (n as f64).cbrt();
            if width > 0.0 {
                ((span / width).ceil() as usize).clamp(1, 10_000)
            } else {
                (n as f64).sqrt().ceil() as usize
            }
        }
    };
    let width = span / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0usize; bins];
    for v in &sorted {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let densities = counts.iter().map(|&c| c as f64 / (n as f64 * width)).collect();
    PdfEstimate {
        label: label.to_string(),
        samples: n,
        edges,
        densities,
        mean,
        std: var.sqrt(),
    }
}

/// Draws `count` germ vectors from the basis distributions.
pub fn sample_germs(basis: &GpcBasisSet, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| basis.params().iter().map(|d| d.sample(&mut rng)).collect())
        .collect()
}

/// Evaluates `Σ c_k H_k(ξ)` at each germ vector.
pub fn evaluate_expansion(basis: &GpcBasisSet, coeffs: &[f64], germs: &[Vec<f64>]) -> Vec<f64> {
    let mut h = vec![0.0; basis.len()];
    germs
        .iter()
        .map(|xi| {
            basis.eval_unchecked(xi, &mut h);
            h.iter().zip(coeffs).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Histogram of a scalar expansion, sampled with a seeded generator.
pub fn pdf_of_expansion(
    basis: &GpcBasisSet,
    coeffs: &[f64],
    samples: usize,
    seed: u64,
    binning: Binning,
) -> PdfEstimate {
    let germs = sample_germs(basis, samples, seed);
    histogram("expansion", &evaluate_expansion(basis, coeffs, &germs), binning)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// L2 norm of all stacked coefficient differences.
    pub l2: f64,
    /// Per grid point L2 norm of the coefficient difference.
    pub per_point: Vec<f64>,
    pub max: f64,
}

/// Coefficient error of `candidate` against `reference`. Orders may differ:
/// a lower-order basis is a prefix of a higher one over the same germs and
/// missing coefficients count as zero.
pub fn compare_methods(reference: &GpcTrajectory, candidate: &GpcTrajectory) -> Result<Comparison, PostError> {
    if reference.n != candidate.n || reference.dims != candidate.dims {
        return Err(PostError::Mismatch(format!(
            "state dimension {} vs {}, germs {} vs {}",
            reference.n, candidate.n, reference.dims, candidate.dims
        )));
    }
    if reference.len() != candidate.len()
        || reference
            .grid
            .iter()
            .zip(&candidate.grid)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1e-300))
    {
        return Err(PostError::Mismatch("grids differ".into()));
    }
    let per_point: Vec<f64> = reference
        .coeffs
        .iter()
        .zip(&candidate.coeffs)
        .map(|(r, c)| {
            let len = r.len().max(c.len());
            (0..len)
                .map(|i| r.get(i).copied().unwrap_or(0.0) - c.get(i).copied().unwrap_or(0.0))
                .map(|d| d * d)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(Comparison {
        l2: per_point.iter().map(|e| e * e).sum::<f64>().sqrt(),
        max: per_point.iter().copied().fold(0.0, f64::max),
        per_point,
    })
}

/// Everything needed to rebuild the expansions from a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientExport {
    pub method: Method,
    pub axis: Axis,
    pub order: usize,
    pub distributions: Vec<String>,
    pub indices: Vec<Vec<u32>>,
    pub states: Vec<String>,
    pub testing_nodes: Option<Vec<Vec<f64>>>,
    pub beta: Option<f64>,
    pub cond_phi: Option<f64>,
    pub grid: Vec<f64>,
    /// `coeffs[g][k·n + i]`.
    pub coeffs: Vec<Vec<f64>>,
}

impl CoefficientExport {
    pub fn new(traj: &GpcTrajectory, basis: &GpcBasisSet, states: &[String], nodes: Option<&TestingNodeSet>) -> Self {
        CoefficientExport {
            method: traj.method,
            axis: traj.axis,
            order: basis.order(),
            distributions: basis.params().iter().map(|d| format!("{d:?}")).collect(),
            indices: basis.indices().iter().map(|m| m.0.clone()).collect(),
            states: states.to_vec(),
            testing_nodes: nodes.map(|n| n.nodes.clone()),
            beta: nodes.map(|n| n.beta_used),
            cond_phi: nodes.map(|n| n.cond_estimate),
            grid: traj.grid.clone(),
            coeffs: traj.coeffs.clone(),
        }
    }

    pub fn write<W: Write>(&self, out: W) -> Result<(), PostError> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Distribution;
    use crate::uq::RunStats;

    fn traj(k: usize, coeffs: Vec<Vec<f64>>) -> GpcTrajectory {
        GpcTrajectory {
            method: Method::St,
            axis: Axis::Time,
            grid: (0..coeffs.len()).map(|i| i as f64 * 0.1).collect(),
            order: 1,
            dims: 1,
            n: coeffs[0].len() / k,
            k,
            coeffs,
            steps: Vec::new(),
            stats: RunStats::default(),
        }
    }

    #[test]
    fn deterministic_trajectory_has_zero_std() {
        let t = traj(1, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let s = stats_over_time(&t, &["a".into(), "b".into()]);
        assert!(s.std.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(s.mean_of(1), vec![2.0, 4.0]);
    }

    #[test]
    fn csv_round_trip() {
        let t = traj(2, vec![vec![1.0 / 3.0, -2e-17, 0.1, 7.0], vec![std::f64::consts::PI, 1e300, -0.5, 1e-300]]);
        let s = stats_over_time(&t, &["v(a)".into(), "i(v1)".into()]);
        let mut buf = Vec::new();
        write_stats_csv(&s, &mut buf).unwrap();
        let back = read_stats_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(read_stats_csv("nope\n".as_bytes()).is_err());
        assert!(read_stats_csv("time,state,mean,std\n0,a,x,1\n".as_bytes()).is_err());
    }

    #[test]
    fn constant_expansion_is_a_spike() {
        let b = GpcBasisSet::new(vec![Distribution::Gaussian], 3).unwrap();
        let p = pdf_of_expansion(&b, &[2.5, 0.0, 0.0, 0.0], 1000, 1, Binning::default());
        assert_eq!(p.densities.len(), 1);
        assert!(p.edges[0] < 2.5 && p.edges[1] > 2.5);
        assert!((p.total_mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn identity_expansion_is_standard_normal() {
        let b = GpcBasisSet::new(vec![Distribution::Gaussian], 2).unwrap();
        let n = 20_000;
        let p = pdf_of_expansion(&b, &[0.0, 1.0, 0.0], n, 3, Binning::default());
        let tol = 3.0 / (n as f64).sqrt();
        assert!(p.mean.abs() < tol);
        assert!((p.std - 1.0).abs() < tol);
        assert!((p.total_mass() - 1.0).abs() < 1e-6);
        let again = pdf_of_expansion(&b, &[0.0, 1.0, 0.0], n, 3, Binning::default());
        assert_eq!(p, again);
    }

    #[test]
    fn ks_of_identical_and_disjoint() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(ks_distance(&a, &a), 0.0);
        let b: Vec<f64> = (200..300).map(f64::from).collect();
        assert_eq!(ks_distance(&a, &b), 1.0);
    }

    #[test]
    fn comparison_pads_lower_order() {
        let r = traj(3, vec![vec![1.0, 0.5, 0.1]]);
        let c = traj(2, vec![vec![1.0, 0.5]]);
        let cmp = compare_methods(&r, &c).unwrap();
        assert!((cmp.l2 - 0.1).abs() < 1e-15);
        assert_eq!(compare_methods(&r, &r).unwrap().l2, 0.0);
        let mut other = r.clone();
        other.dims = 2;
        assert!(compare_methods(&r, &other).is_err());
    }
}
