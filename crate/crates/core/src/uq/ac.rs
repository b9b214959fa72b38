//! Stochastic small-signal analysis. Each testing node is linearized at its
//! own DC point `x̂(ξᵐ)`, the complex system `(G + jωC)x = b` is solved per
//! frequency, and `Φ⁻¹⊗I` maps the nodal solutions to coefficients of the
//! real and imaginary parts separately.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{GpcState, Method, UqError};
use crate::basis::{BasisError, GpcBasisSet};
use crate::circuit::StochasticCircuit;
use crate::engine::EngineError;
use crate::linalg::kron_identity_mul;
use crate::testing_nodes::TestingNodeSet;

/// `points_per_decade` log-spaced frequencies from `fstart` up to `fstop`.
pub fn log_frequencies(fstart: f64, fstop: f64, points_per_decade: usize) -> Vec<f64> {
    if !(fstart > 0.0 && fstop >= fstart) || points_per_decade == 0 {
        return Vec::new();
    }
    let decades = (fstop / fstart).log10();
    let count = (decades * points_per_decade as f64 + 1e-9).floor() as usize;
    (0..=count)
        .map(|i| fstart * 10f64.powf(i as f64 / points_per_decade as f64))
        .collect()
}

#[derive(Debug, Clone)]
pub struct AcResult {
    pub freqs: Vec<f64>,
    pub n: usize,
    pub k: usize,
    /// Per frequency, coefficient-major coefficients of `Re x`.
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl AcResult {
    pub fn re_state(&self, f: usize) -> GpcState {
        GpcState {
            n: self.n,
            coeffs: self.re[f].clone(),
        }
    }

    pub fn im_state(&self, f: usize) -> GpcState {
        GpcState {
            n: self.n,
            coeffs: self.im[f].clone(),
        }
    }

    /// The complex response of `state` at frequency index `f` and germ `xi`.
    pub fn eval(&self, basis: &GpcBasisSet, f: usize, state: usize, xi: &[f64]) -> Result<Complex64, BasisError> {
        let re = basis.expand(&self.re_state(f).series(state), xi)?;
        let im = basis.expand(&self.im_state(f).series(state), xi)?;
        Ok(Complex64::new(re, im))
    }
}

/// `dc` holds the stochastic operating point from the ST DC solve.
pub fn ac_solve(
    circuit: &StochasticCircuit,
    nodes: &TestingNodeSet,
    dc: &[f64],
    freqs: &[f64],
) -> Result<AcResult, UqError> {
    let n = circuit.dim();
    let k = nodes.len();
    let z = kron_identity_mul(&nodes.phi, n, dc);
    let b = DVector::from_vec(circuit.ac_excitation());
    let fail = |source| UqError::Engine {
        method: Method::St,
        source,
    };

    // Nodal solutions indexed [m][f].
    let nodal: Vec<Result<Vec<DVector<Complex64>>, EngineError>> = nodes
        .nodes
        .par_iter()
        .zip(z.par_chunks(n))
        .enumerate()
        .map(|(m, (xi, zm))| {
            let e = circuit
                .eval_qf(zm, xi)
                .map_err(|err| EngineError::Eval(format!("testing node {m}: {err}")))?;
            freqs
                .iter()
                .map(|&f| {
                    let w = 2.0 * std::f64::consts::PI * f;
                    let a = DMatrix::from_fn(n, n, |i, j| Complex64::new(e.df[(i, j)], w * e.dq[(i, j)]));
                    a.lu().solve(&b).ok_or_else(|| {
                        EngineError::Singular(format!("small-signal matrix at testing node {m}, ω = {w:e}"))
                    })
                })
                .collect()
        })
        .collect();
    let nodal = nodal.into_iter().collect::<Result<Vec<_>, _>>().map_err(fail)?;

    let mut re = Vec::with_capacity(freqs.len());
    let mut im = Vec::with_capacity(freqs.len());
    for fi in 0..freqs.len() {
        let stack_re: Vec<f64> = nodal.iter().flat_map(|s| s[fi].iter().map(|c| c.re)).collect();
        let stack_im: Vec<f64> = nodal.iter().flat_map(|s| s[fi].iter().map(|c| c.im)).collect();
        re.push(kron_identity_mul(&nodes.phi_inv, n, &stack_re));
        im.push(kron_identity_mul(&nodes.phi_inv, n, &stack_im));
    }
    Ok(AcResult {
        freqs: freqs.to_vec(),
        n,
        k,
        re,
        im,
    })
}
