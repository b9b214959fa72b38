//! Stochastic solvers: stochastic testing (ST), stochastic Galerkin (SG),
//! tensor-product stochastic collocation (SC) and Monte Carlo (MC).
//!
//! Intrusive methods stack the `K` gPC coefficient vectors coefficient-major,
//! `X[k·n + i]`, so block `k` is `x̂_k`.

mod ac;
mod mc;
mod sc;
mod sg;
mod st;

pub use ac::{ac_solve, log_frequencies, AcResult};
pub use mc::{draw_samples, mc_solve, McOptions};
pub use sc::{sc_solve, ScOptions, ScOutput, DEFAULT_FIXED_STEPS};
pub use sg::{SgProblem, SgSolver};
pub use st::{st_residual, LinearStrategy, StJacobian, StProblem, StSolver};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{moments_from_coeffs, BasisError, GpcBasisSet};
use crate::circuit::{AnalysisSpec, CircuitError, StochasticCircuit};
use crate::engine::{
    dc_solve, DaeProblem, DeterministicProblem, EngineError, NewtonConfig, TranOptions, Transient,
};
use crate::quadrature::QuadratureError;
use crate::testing_nodes::SelectionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    St,
    Sg,
    Sc,
    Mc,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::St => "st",
            Method::Sg => "sg",
            Method::Sc => "sc",
            Method::Mc => "mc",
        })
    }
}

#[derive(Debug, Error)]
pub enum UqError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("{method}: {source}")]
    Engine {
        method: Method,
        #[source]
        source: EngineError,
    },
    #[error("{method}: simulation at ξ = {xi:?} failed: {source}")]
    NodeFailure {
        method: Method,
        xi: Vec<f64>,
        #[source]
        source: EngineError,
    },
    #[error("mc: {failed} of {total} samples failed (limit 1%)")]
    TooManyFailures { failed: usize, total: usize },
    #[error("invalid analysis: {0}")]
    Analysis(String),
}

impl UqError {
    fn engine(method: Method) -> impl Fn(EngineError) -> UqError {
        move |source| UqError::Engine { method, source }
    }

    /// The engine failure underneath, if any.
    pub fn engine_error(&self) -> Option<&EngineError> {
        match self {
            UqError::Engine { source, .. } | UqError::NodeFailure { source, .. } => Some(source),
            _ => None,
        }
    }
}

/// What a run computes.
#[derive(Debug, Clone, PartialEq)]
pub enum Analysis {
    Dc,
    /// Holds source `source` at each of `values` in turn.
    DcSweep { source: usize, values: Vec<f64> },
    Tran(TranOptions),
}

impl Analysis {
    /// Converts a netlist card; transient settings other than `t_stop` and
    /// `h_max` come from `base`.
    pub fn from_spec(circuit: &StochasticCircuit, spec: &AnalysisSpec, base: &TranOptions) -> Result<Self, UqError> {
        match spec {
            AnalysisSpec::Dc => Ok(Analysis::Dc),
            AnalysisSpec::DcSweep {
                source,
                start,
                stop,
                step,
            } => {
                let idx = circuit
                    .source_index(source)
                    .ok_or_else(|| UqError::Analysis(format!("unknown sweep source {source}")))?;
                Ok(Analysis::DcSweep {
                    source: idx,
                    values: sweep_values(*start, *stop, *step),
                })
            }
            AnalysisSpec::Tran { tstop, hmax } => {
                let mut opts = *base;
                opts.t_stop = *tstop;
                if hmax.is_some() {
                    opts.control.h_max = *hmax;
                }
                Ok(Analysis::Tran(opts))
            }
            AnalysisSpec::Ac { .. } => Err(UqError::Analysis("AC is solved by ac_solve".into())),
        }
    }

    pub fn axis(&self) -> Axis {
        match self {
            Analysis::Dc => Axis::Dc,
            Analysis::DcSweep { .. } => Axis::Sweep,
            Analysis::Tran(_) => Axis::Time,
        }
    }
}

/// `start, start+step, …` up to `stop` inclusive (within rounding), in either direction.
pub fn sweep_values(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let step = step.abs();
    let span = (stop - start).abs();
    let count = (span / step + 1e-9).floor() as usize;
    let dir = if stop >= start { 1.0 } else { -1.0 };
    (0..=count).map(|i| start + dir * step * i as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Dc,
    Sweep,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMeta {
    pub h: f64,
    pub newton_iters: usize,
    pub lte_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunStats {
    /// Deterministic evaluation points: `K` for ST, quadrature nodes for SG
    /// and SC, samples for MC.
    pub nodes: usize,
    pub newton_iters: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_lte_ratio: f64,
}

/// One deterministic (or stacked) run on its own grid.
#[derive(Debug, Clone)]
pub struct RawRun {
    pub grid: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub steps: Vec<StepMeta>,
    pub stats: RunStats,
}

/// Problems whose independent sources can be pinned for DC sweeps.
pub trait Sweepable {
    fn set_overrides(&mut self, overrides: Vec<(usize, f64)>);
}

impl Sweepable for DeterministicProblem<'_> {
    fn set_overrides(&mut self, overrides: Vec<(usize, f64)>) {
        self.overrides = overrides;
    }
}

/// Runs one analysis from the initial guess `x0`.
pub fn run_analysis<P: DaeProblem + Sweepable>(
    problem: &mut P,
    x0: &[f64],
    analysis: &Analysis,
    newton: &NewtonConfig,
) -> Result<RawRun, EngineError> {
    let mut stats = RunStats::default();
    let meta0 = |iters| StepMeta {
        h: 0.0,
        newton_iters: iters,
        lte_ratio: 0.0,
    };
    match analysis {
        Analysis::Dc => {
            problem.set_overrides(Vec::new());
            let dc = dc_solve(problem, x0, newton)?;
            stats.newton_iters = dc.iterations;
            Ok(RawRun {
                grid: vec![0.0],
                states: vec![dc.x],
                steps: vec![meta0(dc.iterations)],
                stats,
            })
        }
        Analysis::DcSweep { source, values } => {
            let mut guess = x0.to_vec();
            let mut states = Vec::with_capacity(values.len());
            let mut steps = Vec::with_capacity(values.len());
            for &v in values {
                problem.set_overrides(vec![(*source, v)]);
                let dc = dc_solve(problem, &guess, newton)?;
                stats.newton_iters += dc.iterations;
                steps.push(meta0(dc.iterations));
                guess.clone_from(&dc.x);
                states.push(dc.x);
            }
            problem.set_overrides(Vec::new());
            Ok(RawRun {
                grid: values.clone(),
                states,
                steps,
                stats,
            })
        }
        Analysis::Tran(opts) => {
            problem.set_overrides(Vec::new());
            let dc = dc_solve(problem, x0, &opts.newton)?;
            let tr = Transient::new(&*problem, dc.x, dc.q, *opts)?.run()?;
            stats.newton_iters = dc.iterations + tr.newton_iters;
            stats.accepted_steps = tr.accepted;
            stats.rejected_steps = tr.rejected;
            stats.max_lte_ratio = tr.max_lte_ratio;
            let mut grid = Vec::with_capacity(tr.points.len());
            let mut states = Vec::with_capacity(tr.points.len());
            let mut steps = Vec::with_capacity(tr.points.len());
            for p in tr.points {
                grid.push(p.t);
                steps.push(StepMeta {
                    h: p.h,
                    newton_iters: p.newton_iters,
                    lte_ratio: p.lte_ratio,
                });
                states.push(p.x);
            }
            Ok(RawRun {
                grid,
                states,
                steps,
                stats,
            })
        }
    }
}

/// Coefficients `x̂_1..x̂_K` of one grid point, flattened coefficient-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpcState {
    pub n: usize,
    pub coeffs: Vec<f64>,
}

impl GpcState {
    pub fn k(&self) -> usize {
        self.coeffs.len() / self.n
    }

    pub fn block(&self, k: usize) -> &[f64] {
        &self.coeffs[k * self.n..(k + 1) * self.n]
    }

    /// Coefficients of one state across the basis.
    pub fn series(&self, state: usize) -> Vec<f64> {
        (0..self.k()).map(|k| self.coeffs[k * self.n + state]).collect()
    }

    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let blocks: Vec<Vec<f64>> = (0..self.k()).map(|k| self.block(k).to_vec()).collect();
        moments_from_coeffs(&blocks)
    }

    /// `x̂(ξ) = Σ_k x̂_k H_k(ξ)`.
    pub fn eval(&self, basis: &GpcBasisSet, xi: &[f64]) -> Result<Vec<f64>, BasisError> {
        let h = basis.eval(xi)?;
        let mut out = vec![0.0; self.n];
        for (k, hk) in h.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.block(k)) {
                *o += hk * c;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpcTrajectory {
    pub method: Method,
    pub axis: Axis,
    /// Times, sweep values, or a single zero for DC.
    pub grid: Vec<f64>,
    /// Total degree and number of germs of the basis.
    pub order: usize,
    pub dims: usize,
    pub n: usize,
    pub k: usize,
    pub coeffs: Vec<Vec<f64>>,
    pub steps: Vec<StepMeta>,
    pub stats: RunStats,
}

impl GpcTrajectory {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn state(&self, i: usize) -> GpcState {
        GpcState {
            n: self.n,
            coeffs: self.coeffs[i].clone(),
        }
    }

    pub fn last(&self) -> GpcState {
        self.state(self.len() - 1)
    }
}

/// Independent deterministic runs on a shared grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleEnsemble {
    pub method: Method,
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// `solutions[s][g]` is the state vector of sample `s` at grid point `g`.
    pub solutions: Vec<Vec<Vec<f64>>>,
    pub failures: usize,
    pub stats: RunStats,
}

impl SampleEnsemble {
    /// Weighted mean and standard deviation of one state at one grid point,
    /// plus the standard error of the mean for equally weighted samples.
    pub fn moments(&self, g: usize, state: usize) -> (f64, f64, f64) {
        let n = self.solutions.len();
        let vals = self.solutions.iter().map(|s| s[g][state]);
        let wsum: f64 = self.weights.iter().sum();
        let mean: f64 = vals.clone().zip(&self.weights).map(|(v, w)| v * w).sum::<f64>() / wsum;
        let var: f64 = vals.zip(&self.weights).map(|(v, w)| w * (v - mean) * (v - mean)).sum::<f64>() / wsum;
        // Bessel's correction for random samples; quadrature weights are exact.
        let var = match (self.method, n) {
            (Method::Mc, 1) => 0.0,
            (Method::Mc, _) => var * n as f64 / (n as f64 - 1.0),
            _ => var,
        };
        let std = var.max(0.0).sqrt();
        (mean, std, std / (n as f64).sqrt())
    }
}

/// Solves the nominal circuit at the germ means: the starting guess for the
/// stacked problems.
pub(crate) fn nominal_dc(circuit: &StochasticCircuit, newton: &NewtonConfig, method: Method) -> Result<Vec<f64>, UqError> {
    let p = DeterministicProblem::new(circuit, circuit.mean_point());
    dc_solve(&p, &vec![0.0; circuit.dim()], newton)
        .map(|d| d.x)
        .map_err(UqError::engine(method))
}

/// `[x_nom, 0, …, 0]`.
pub(crate) fn mean_block_guess(x_nom: &[f64], k: usize) -> Vec<f64> {
    let mut x = vec![0.0; x_nom.len() * k];
    x[..x_nom.len()].copy_from_slice(x_nom);
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grid() {
        assert_eq!(sweep_values(0.0, 1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(sweep_values(1.0, 0.0, 0.5), vec![1.0, 0.5, 0.0]);
        assert_eq!(sweep_values(0.0, 0.3, 0.1).len(), 4);
    }

    #[test]
    fn ensemble_moments() {
        let e = SampleEnsemble {
            method: Method::Mc,
            axis: Axis::Dc,
            grid: vec![0.0],
            samples: vec![vec![]; 4],
            weights: vec![0.25; 4],
            solutions: vec![vec![vec![1.0]], vec![vec![2.0]], vec![vec![3.0]], vec![vec![4.0]]],
            failures: 0,
            stats: RunStats::default(),
        };
        let (m, s, se) = e.moments(0, 0);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((se - s / 2.0).abs() < 1e-15);
    }
}
