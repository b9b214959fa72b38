//! Monte Carlo: seeded samples of the germs, one deterministic run each.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sc::{fixed_step_analysis, merge_stats, run_points};
use super::{nominal_dc, Analysis, Method, SampleEnsemble, UqError};
use crate::circuit::StochasticCircuit;
use crate::engine::NewtonConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    /// Replace every sample by the germ means.
    pub mean_point: bool,
    /// Transient step shared by every run; defaults to `t_stop/2000`.
    pub h_fixed: Option<f64>,
    pub newton: NewtonConfig,
}

impl McOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        McOptions {
            samples,
            seed,
            mean_point: false,
            h_fixed: None,
            newton: NewtonConfig::default(),
        }
    }
}

/// Draws `count` germ vectors from a ChaCha8 stream seeded with `seed`.
pub fn draw_samples(circuit: &StochasticCircuit, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists = circuit.distributions();
    (0..count)
        .map(|_| dists.iter().map(|d| d.sample(&mut rng)).collect())
        .collect()
}

/// Failed samples are dropped and counted; more than 1% aborts the run.
pub fn mc_solve(circuit: &StochasticCircuit, opts: &McOptions, analysis: &Analysis) -> Result<SampleEnsemble, UqError> {
    if opts.samples == 0 {
        return Err(UqError::Analysis("Monte Carlo needs at least one sample".into()));
    }
    let points = if opts.mean_point {
        vec![circuit.mean_point(); opts.samples]
    } else {
        draw_samples(circuit, opts.samples, opts.seed)
    };
    let analysis = fixed_step_analysis(analysis, opts.h_fixed)?;
    let x0 = nominal_dc(circuit, &opts.newton, Method::Mc)?;

    let results = run_points(circuit, &points, &x0, &analysis, &opts.newton);
    let mut samples = Vec::with_capacity(points.len());
    let mut runs = Vec::with_capacity(points.len());
    let mut failed = 0;
    for (xi, res) in points.into_iter().zip(results) {
        match res {
            Ok(r) => {
                samples.push(xi);
                runs.push(r);
            }
            Err(_) => failed += 1,
        }
    }
    if failed * 100 > opts.samples || runs.is_empty() {
        return Err(UqError::TooManyFailures {
            failed,
            total: opts.samples,
        });
    }
    let grid = runs[0].grid.clone();
    if runs.iter().any(|r| r.grid.len() != grid.len()) {
        return Err(UqError::Analysis("Monte Carlo runs produced different time grids".into()));
    }
    let stats = merge_stats(&runs);
    let w = 1.0 / runs.len() as f64;
    Ok(SampleEnsemble {
        method: Method::Mc,
        axis: analysis.axis(),
        grid,
        weights: vec![w; runs.len()],
        samples,
        solutions: runs.into_iter().map(|r| r.states).collect(),
        failures: failed,
        stats,
    })
}
