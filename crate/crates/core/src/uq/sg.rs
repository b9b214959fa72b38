//! Stochastic Galerkin: the residual is projected onto every basis function
//! with a `(p+1)^l` Gauss tensor rule. Block `(k, j)` of the Jacobian is
//! `Σ_s w_s H_k(ξ_s) H_j(ξ_s) J(ξ_s)`, which couples all blocks, so each
//! Newton step is one dense LU of size `nK`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{mean_block_guess, nominal_dc, run_analysis, Analysis, GpcTrajectory, Method, Sweepable, UqError};
use crate::basis::GpcBasisSet;
use crate::circuit::{QfEval, StochasticCircuit};
use crate::engine::deterministic::{lu_solve, source_vector};
use crate::engine::{DaeProblem, EngineError, Evaluation, NewtonConfig};
use crate::quadrature::TensorGrid;

#[derive(Debug, Clone)]
pub struct SgProblem<'a> {
    pub circuit: &'a StochasticCircuit,
    pub basis: &'a GpcBasisSet,
    /// Quadrature nodes with `H_k` evaluated at each.
    nodes: Vec<(Vec<f64>, f64, Vec<f64>)>,
    pub overrides: Vec<(usize, f64)>,
}

impl Sweepable for SgProblem<'_> {
    fn set_overrides(&mut self, overrides: Vec<(usize, f64)>) {
        self.overrides = overrides;
    }
}

impl<'a> SgProblem<'a> {
    pub fn new(circuit: &'a StochasticCircuit, basis: &'a GpcBasisSet, grid: &TensorGrid) -> Result<Self, UqError> {
        let nodes = grid
            .enumerate()?
            .into_iter()
            .map(|(xi, w)| {
                let h = basis.eval(&xi)?;
                Ok((xi, w, h))
            })
            .collect::<Result<Vec<_>, UqError>>()?;
        Ok(SgProblem {
            circuit,
            basis,
            nodes,
            overrides: Vec::new(),
        })
    }

    pub fn quadrature_nodes(&self) -> usize {
        self.nodes.len()
    }
}

impl DaeProblem for SgProblem<'_> {
    type Jacobian = DMatrix<f64>;

    fn dim(&self) -> usize {
        self.circuit.dim() * self.basis.len()
    }

    fn evaluate(&self, x: &[f64], t: f64, scale: f64, c0: f64) -> Result<Evaluation<DMatrix<f64>>, EngineError> {
        let n = self.circuit.dim();
        let k = self.basis.len();
        let evals: Vec<Result<QfEval, EngineError>> = self
            .nodes
            .par_iter()
            .map(|(xi, _, h)| {
                let mut z = vec![0.0; n];
                for (kk, hk) in h.iter().enumerate() {
                    for (zi, xv) in z.iter_mut().zip(&x[kk * n..(kk + 1) * n]) {
                        *zi += hk * xv;
                    }
                }
                let mut e = QfEval::zeros(n);
                self.circuit
                    .eval_into(&z, xi, &mut e)
                    .map_err(|err| EngineError::Eval(format!("quadrature node {xi:?}: {err}")))?;
                if c0 != 0.0 {
                    e.df += &e.dq * c0;
                }
                Ok(e)
            })
            .collect();
        let evals = evals.into_iter().collect::<Result<Vec<_>, _>>()?;

        // Row block kk of every output is independent.
        let rows: Vec<(Vec<f64>, Vec<f64>, DMatrix<f64>)> = (0..k)
            .into_par_iter()
            .map(|kk| {
                let mut q = vec![0.0; n];
                let mut f = vec![0.0; n];
                let mut jrow = DMatrix::zeros(n, n * k);
                for ((_, w, h), e) in self.nodes.iter().zip(&evals) {
                    let a = w * h[kk];
                    if a == 0.0 {
                        continue;
                    }
                    q.iter_mut().zip(e.q.iter()).for_each(|(o, v)| *o += a * v);
                    f.iter_mut().zip(e.f.iter()).for_each(|(o, v)| *o += a * v);
                    for (jj, hj) in h.iter().enumerate() {
                        let c = a * hj;
                        if c == 0.0 {
                            continue;
                        }
                        let mut view = jrow.columns_mut(jj * n, n);
                        view.zip_apply(&e.df, |o, v| *o += c * v);
                    }
                }
                (q, f, jrow)
            })
            .collect();

        // The excitation is deterministic, so it projects onto H_1 = 1 only.
        let b = source_vector(self.circuit, &self.overrides, t, scale);
        let mut q = Vec::with_capacity(n * k);
        let mut fb = Vec::with_capacity(n * k);
        let mut jac = DMatrix::zeros(n * k, n * k);
        for (kk, (qk, fk, jrow)) in rows.into_iter().enumerate() {
            q.extend(qk);
            if kk == 0 {
                fb.extend(fk.iter().zip(&b).map(|(f, b)| f - b));
            } else {
                fb.extend(fk);
            }
            jac.rows_mut(kk * n, n).copy_from(&jrow);
        }
        Ok(Evaluation { q, fb, jac })
    }

    fn solve(&self, jac: &DMatrix<f64>, rhs: &mut [f64]) -> Result<(), EngineError> {
        lu_solve(jac, rhs).map_err(|_| EngineError::Singular("stochastic Galerkin Jacobian".into()))
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.circuit.breakpoints(t0, t1)
    }
}

#[derive(Debug, Clone)]
pub struct SgSolver<'a> {
    pub circuit: &'a StochasticCircuit,
    pub basis: GpcBasisSet,
    pub grid: TensorGrid,
    pub newton: NewtonConfig,
}

impl<'a> SgSolver<'a> {
    /// Projection uses `order + 1` Gauss points per dimension.
    pub fn new(circuit: &'a StochasticCircuit, order: usize) -> Result<Self, UqError> {
        let dists = circuit.distributions();
        let basis = GpcBasisSet::new(dists.clone(), order)?;
        let grid = TensorGrid::gauss(&dists, order + 1)?;
        Ok(SgSolver {
            circuit,
            basis,
            grid,
            newton: NewtonConfig::default(),
        })
    }

    pub fn problem(&self) -> Result<SgProblem<'_>, UqError> {
        SgProblem::new(self.circuit, &self.basis, &self.grid)
    }

    pub fn solve(&self, analysis: &Analysis) -> Result<GpcTrajectory, UqError> {
        let x_nom = nominal_dc(self.circuit, &self.newton, Method::Sg)?;
        let x0 = mean_block_guess(&x_nom, self.basis.len());
        let mut problem = self.problem()?;
        let newton = match analysis {
            Analysis::Tran(o) => o.newton,
            _ => self.newton,
        };
        let run = run_analysis(&mut problem, &x0, analysis, &newton).map_err(UqError::engine(Method::Sg))?;
        let mut stats = run.stats;
        stats.nodes = problem.quadrature_nodes();
        Ok(GpcTrajectory {
            method: Method::Sg,
            axis: analysis.axis(),
            grid: run.grid,
            order: self.basis.order(),
            dims: self.basis.dims(),
            n: self.circuit.dim(),
            k: self.basis.len(),
            coeffs: run.states,
            steps: run.steps,
            stats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uq::StSolver;

    #[test]
    fn linear_divider_matches_st() {
        // The divider output is rational in ξ, so the two methods differ
        // only by truncation error, which is tiny at p = 4.
        let text = "V1 a 0 1\nR1 a m 1k\nR2 m 0 dist=uniform(900, 1100)\n";
        let c = StochasticCircuit::from_text(text).unwrap();
        let sg = SgSolver::new(&c, 4).unwrap().solve(&Analysis::Dc).unwrap();
        let st = StSolver::new(&c, 4, 1e-2).unwrap().solve(&Analysis::Dc).unwrap();
        let m = c.state_index("m").unwrap();
        let (ms, ss) = sg.last().moments();
        let (mt, stt) = st.last().moments();
        assert!((ms[m] - mt[m]).abs() < 1e-7, "{} {}", ms[m], mt[m]);
        assert!((ss[m] - stt[m]).abs() < 1e-6 * ss[m], "{} {}", ss[m], stt[m]);
    }

    #[test]
    fn current_into_random_resistor_is_exact() {
        // v = I·R with R affine in ξ: the expansion is exact at p = 1 and
        // Galerkin and testing agree to round-off.
        let c = StochasticCircuit::from_text("I1 0 a 1m\nR1 a 0 dist=gauss(1k, 100)\n").unwrap();
        let sg = SgSolver::new(&c, 3).unwrap().solve(&Analysis::Dc).unwrap();
        let st = StSolver::new(&c, 3, 1e-2).unwrap().solve(&Analysis::Dc).unwrap();
        let (a, b) = (sg.last(), st.last());
        assert!((a.coeffs[0] - 1.0).abs() < 1e-9, "{:?}", a.coeffs);
        assert!((a.coeffs[1] - 0.1).abs() < 1e-9, "{:?}", a.coeffs);
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
