//! Tensor-product stochastic collocation: independent deterministic runs at
//! the `(p+1)^l` Gauss nodes, projected onto the basis by quadrature. All
//! transient runs share one fixed step so their grids coincide.

use rayon::prelude::*;

use super::{nominal_dc, run_analysis, Analysis, GpcTrajectory, Method, RawRun, RunStats, SampleEnsemble, UqError};
use crate::basis::GpcBasisSet;
use crate::circuit::StochasticCircuit;
use crate::engine::{DeterministicProblem, EngineError, NewtonConfig};
use crate::quadrature::TensorGrid;

/// Steps per transient run when no fixed step is given.
pub const DEFAULT_FIXED_STEPS: f64 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScOptions {
    pub order: usize,
    /// Transient step shared by every run; defaults to `t_stop/2000`.
    pub h_fixed: Option<f64>,
    pub newton: NewtonConfig,
}

impl ScOptions {
    pub fn new(order: usize) -> Self {
        ScOptions {
            order,
            h_fixed: None,
            newton: NewtonConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScOutput {
    pub trajectory: GpcTrajectory,
    pub ensemble: SampleEnsemble,
}

/// Pins transient runs to a fixed step so independent runs share a grid.
pub(crate) fn fixed_step_analysis(analysis: &Analysis, h_fixed: Option<f64>) -> Result<Analysis, UqError> {
    match analysis {
        Analysis::Tran(o) => {
            let mut o = *o;
            if o.control.fixed_step.is_none() {
                let h = h_fixed.unwrap_or(o.t_stop / DEFAULT_FIXED_STEPS);
                if !(h > 0.0 && h.is_finite()) {
                    return Err(UqError::Analysis(format!("fixed step must be positive, got {h}")));
                }
                o.control.fixed_step = Some(h);
            }
            Ok(Analysis::Tran(o))
        }
        other => Ok(other.clone()),
    }
}

/// Runs the deterministic circuit at each point, in parallel, returning
/// results in input order.
pub(crate) fn run_points(
    circuit: &StochasticCircuit,
    points: &[Vec<f64>],
    x0: &[f64],
    analysis: &Analysis,
    newton: &NewtonConfig,
) -> Vec<Result<RawRun, EngineError>> {
    let newton = match analysis {
        Analysis::Tran(o) => o.newton,
        _ => *newton,
    };
    points
        .par_iter()
        .map(|xi| {
            let mut p = DeterministicProblem::new(circuit, xi.clone());
            run_analysis(&mut p, x0, analysis, &newton)
        })
        .collect()
}

pub(crate) fn merge_stats(runs: &[RawRun]) -> RunStats {
    let mut s = RunStats {
        nodes: runs.len(),
        ..RunStats::default()
    };
    for r in runs {
        s.newton_iters += r.stats.newton_iters;
        s.accepted_steps += r.stats.accepted_steps;
        s.rejected_steps += r.stats.rejected_steps;
        s.max_lte_ratio = s.max_lte_ratio.max(r.stats.max_lte_ratio);
    }
    s
}

pub fn sc_solve(circuit: &StochasticCircuit, opts: &ScOptions, analysis: &Analysis) -> Result<ScOutput, UqError> {
    let dists = circuit.distributions();
    let basis = GpcBasisSet::new(dists.clone(), opts.order)?;
    let grid = TensorGrid::gauss(&dists, opts.order + 1)?;
    let (points, weights): (Vec<Vec<f64>>, Vec<f64>) = grid.enumerate()?.into_iter().unzip();
    let analysis = fixed_step_analysis(analysis, opts.h_fixed)?;
    let x0 = nominal_dc(circuit, &opts.newton, Method::Sc)?;

    let mut runs = Vec::with_capacity(points.len());
    for (res, xi) in run_points(circuit, &points, &x0, &analysis, &opts.newton).into_iter().zip(&points) {
        runs.push(res.map_err(|source| UqError::NodeFailure {
            method: Method::Sc,
            xi: xi.clone(),
            source,
        })?);
    }
    let grid_vals = runs[0].grid.clone();
    if runs.iter().any(|r| r.grid.len() != grid_vals.len()) {
        return Err(UqError::Analysis("collocation runs produced different time grids".into()));
    }

    let n = circuit.dim();
    let k = basis.len();
    let h: Vec<Vec<f64>> = points.iter().map(|xi| basis.eval(xi)).collect::<Result<_, _>>()?;
    let coeffs: Vec<Vec<f64>> = (0..grid_vals.len())
        .map(|g| {
            let mut c = vec![0.0; n * k];
            for ((run, hs), w) in runs.iter().zip(&h).zip(&weights) {
                let x = &run.states[g];
                for (j, hj) in hs.iter().enumerate() {
                    let a = w * hj;
                    for (o, v) in c[j * n..(j + 1) * n].iter_mut().zip(x) {
                        *o += a * v;
                    }
                }
            }
            c
        })
        .collect();

    let stats = merge_stats(&runs);
    let trajectory = GpcTrajectory {
        method: Method::Sc,
        axis: analysis.axis(),
        grid: grid_vals.clone(),
        order: basis.order(),
        dims: basis.dims(),
        n,
        k,
        coeffs,
        steps: runs[0].steps.clone(),
        stats,
    };
    let ensemble = SampleEnsemble {
        method: Method::Sc,
        axis: analysis.axis(),
        grid: grid_vals,
        samples: points,
        weights,
        solutions: runs.into_iter().map(|r| r.states).collect(),
        failures: 0,
        stats,
    };
    Ok(ScOutput { trajectory, ensemble })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uq::StSolver;

    #[test]
    fn affine_solution_matches_st() {
        let c = StochasticCircuit::from_text("I1 0 a 1m\nR1 a 0 dist=uniform(900, 1100)\n").unwrap();
        let sc = sc_solve(&c, &ScOptions::new(2), &Analysis::Dc).unwrap();
        let st = StSolver::new(&c, 2, 1e-2).unwrap().solve(&Analysis::Dc).unwrap();
        for (a, b) in sc.trajectory.coeffs[0].iter().zip(&st.coeffs[0]) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        let wsum: f64 = sc.ensemble.weights.iter().sum();
        assert!((wsum - 1.0).abs() < 1e-14);
    }

    #[test]
    fn node_count_is_tensor() {
        let c = StochasticCircuit::from_text(
            "I1 0 a 1m\nR1 a b dist=uniform(900, 1100)\nR2 b 0 dist=gauss(1k, 50)\n",
        )
        .unwrap();
        let sc = sc_solve(&c, &ScOptions::new(3), &Analysis::Dc).unwrap();
        assert_eq!(sc.trajectory.stats.nodes, 16);
    }

    #[test]
    fn failure_names_the_node() {
        // One Newton iteration cannot converge the diode anywhere.
        let c = StochasticCircuit::from_text("V1 a 0 5\nR1 a k dist=uniform(900, 1100)\nD1 k 0\n").unwrap();
        let mut opts = ScOptions::new(1);
        opts.newton.max_iters = 1;
        match sc_solve(&c, &opts, &Analysis::Dc) {
            Err(UqError::Engine { .. }) | Err(UqError::NodeFailure { .. }) => {}
            other => panic!("expected a failure, got {other:?}"),
        }
    }
}
