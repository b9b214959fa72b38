//! Stochastic testing: the gPC residual is forced to vanish at `K` testing
//! nodes. With `Z = (Φ⊗I)X` the nodal values, block `m` of the residual is
//! the deterministic residual at `(z_m, ξᵐ)`, so `∂R/∂X = J̃·(Φ⊗I)` with
//! block-diagonal `J̃`. A Newton step therefore solves `K` independent `n×n`
//! systems and maps back with `Φ⁻¹⊗I`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{mean_block_guess, nominal_dc, run_analysis, Analysis, GpcTrajectory, Method, Sweepable, UqError};
use crate::basis::{Distribution, GpcBasisSet};
use crate::circuit::{QfEval, StochasticCircuit};
use crate::engine::deterministic::{lu_solve, source_vector};
use crate::engine::{DaeProblem, EngineError, Evaluation, NewtonConfig};
use crate::linalg::kron_identity_mul;
use crate::testing_nodes::TestingNodeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearStrategy {
    /// `K` block solves then `Φ⁻¹⊗I`.
    #[default]
    Decoupled,
    /// One dense LU of the coupled `nK×nK` Jacobian; kept as a reference.
    Dense,
}

/// Block-diagonal `J̃`: block `m` is `c0·∂q/∂x + ∂f/∂x` at testing node `m`.
#[derive(Debug, Clone)]
pub struct StJacobian {
    pub blocks: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct StProblem<'a> {
    pub circuit: &'a StochasticCircuit,
    pub nodes: &'a TestingNodeSet,
    pub strategy: LinearStrategy,
    pub overrides: Vec<(usize, f64)>,
}

impl Sweepable for StProblem<'_> {
    fn set_overrides(&mut self, overrides: Vec<(usize, f64)>) {
        self.overrides = overrides;
    }
}

impl<'a> StProblem<'a> {
    pub fn new(circuit: &'a StochasticCircuit, nodes: &'a TestingNodeSet) -> Self {
        StProblem {
            circuit,
            nodes,
            strategy: LinearStrategy::Decoupled,
            overrides: Vec::new(),
        }
    }

    fn n(&self) -> usize {
        self.circuit.dim()
    }

    /// Nodal values `Z = (Φ⊗I)X`.
    pub fn nodal(&self, x: &[f64]) -> Vec<f64> {
        kron_identity_mul(&self.nodes.phi, self.n(), x)
    }

    /// The coupled Jacobian `J̃·(Φ⊗I)`.
    pub fn coupled_jacobian(&self, jac: &StJacobian) -> DMatrix<f64> {
        let n = self.n();
        let k = self.nodes.len();
        let phi = &self.nodes.phi;
        let mut out = DMatrix::zeros(n * k, n * k);
        for (m, block) in jac.blocks.iter().enumerate() {
            for c in 0..k {
                let w = phi[(m, c)];
                if w == 0.0 {
                    continue;
                }
                for j in 0..n {
                    for i in 0..n {
                        out[(m * n + i, c * n + j)] = w * block[(i, j)];
                    }
                }
            }
        }
        out
    }

    /// Block solves `J̃Δz = rhs` followed by `ΔX = (Φ⁻¹⊗I)Δz`.
    pub fn solve_decoupled(&self, jac: &StJacobian, rhs: &mut [f64]) -> Result<(), EngineError> {
        let n = self.n();
        let dz: Vec<Result<Vec<f64>, EngineError>> = jac
            .blocks
            .par_iter()
            .zip(rhs.par_chunks(n))
            .enumerate()
            .map(|(m, (block, r))| {
                let mut y = r.to_vec();
                lu_solve(block, &mut y).map_err(|_| EngineError::Singular(format!("block of testing node {m}")))?;
                Ok(y)
            })
            .collect();
        let mut flat = Vec::with_capacity(rhs.len());
        for d in dz {
            flat.extend(d?);
        }
        let dx = kron_identity_mul(&self.nodes.phi_inv, n, &flat);
        rhs.copy_from_slice(&dx);
        Ok(())
    }

    pub fn solve_dense(&self, jac: &StJacobian, rhs: &mut [f64]) -> Result<(), EngineError> {
        lu_solve(&self.coupled_jacobian(jac), rhs)
    }
}

impl DaeProblem for StProblem<'_> {
    type Jacobian = StJacobian;

    fn dim(&self) -> usize {
        self.n() * self.nodes.len()
    }

    fn evaluate(&self, x: &[f64], t: f64, scale: f64, c0: f64) -> Result<Evaluation<StJacobian>, EngineError> {
        let n = self.n();
        let z = self.nodal(x);
        let b = source_vector(self.circuit, &self.overrides, t, scale);
        let per_node: Vec<Result<QfEval, EngineError>> = self
            .nodes
            .nodes
            .par_iter()
            .zip(z.par_chunks(n))
            .enumerate()
            .map(|(m, (xi, zm))| {
                let mut e = QfEval::zeros(n);
                self.circuit
                    .eval_into(zm, xi, &mut e)
                    .map_err(|err| EngineError::Eval(format!("testing node {m}: {err}")))?;
                Ok(e)
            })
            .collect();
        let mut q = Vec::with_capacity(x.len());
        let mut fb = Vec::with_capacity(x.len());
        let mut blocks = Vec::with_capacity(self.nodes.len());
        for e in per_node {
            let e = e?;
            q.extend(e.q.iter());
            fb.extend(e.f.iter().zip(&b).map(|(f, b)| f - b));
            blocks.push(if c0 != 0.0 { e.df + e.dq * c0 } else { e.df });
        }
        Ok(Evaluation {
            q,
            fb,
            jac: StJacobian { blocks },
        })
    }

    fn solve(&self, jac: &StJacobian, rhs: &mut [f64]) -> Result<(), EngineError> {
        match self.strategy {
            LinearStrategy::Decoupled => self.solve_decoupled(jac, rhs),
            LinearStrategy::Dense => self.solve_dense(jac, rhs),
        }
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.circuit.breakpoints(t0, t1)
    }
}

/// Stacked ST residual `c0·Q(X) + F(X) − b(t) + hist`.
pub fn st_residual(
    problem: &StProblem<'_>,
    x: &[f64],
    t: f64,
    c0: f64,
    hist: Option<&[f64]>,
) -> Result<Vec<f64>, EngineError> {
    let e = problem.evaluate(x, t, 1.0, c0)?;
    let mut r: Vec<f64> = e.q.iter().zip(&e.fb).map(|(q, fb)| c0 * q + fb).collect();
    if let Some(h) = hist {
        r.iter_mut().zip(h).for_each(|(r, h)| *r += h);
    }
    Ok(r)
}

/// Basis, testing nodes and solver settings for one circuit.
#[derive(Debug, Clone)]
pub struct StSolver<'a> {
    pub circuit: &'a StochasticCircuit,
    pub basis: GpcBasisSet,
    pub nodes: TestingNodeSet,
    pub strategy: LinearStrategy,
    pub newton: NewtonConfig,
}

impl<'a> StSolver<'a> {
    pub fn new(circuit: &'a StochasticCircuit, order: usize, beta: f64) -> Result<Self, UqError> {
        let dists: Vec<Distribution> = circuit.distributions();
        let basis = GpcBasisSet::new(dists, order)?;
        let nodes = TestingNodeSet::for_basis(&basis, beta)?;
        Ok(StSolver {
            circuit,
            basis,
            nodes,
            strategy: LinearStrategy::Decoupled,
            newton: NewtonConfig::default(),
        })
    }

    pub fn problem(&self) -> StProblem<'_> {
        StProblem {
            circuit: self.circuit,
            nodes: &self.nodes,
            strategy: self.strategy,
            overrides: Vec::new(),
        }
    }

    /// Initial guess: nominal DC in the mean block, zero elsewhere.
    pub fn initial_guess(&self) -> Result<Vec<f64>, UqError> {
        let x_nom = nominal_dc(self.circuit, &self.newton, Method::St)?;
        Ok(mean_block_guess(&x_nom, self.basis.len()))
    }

    pub fn solve(&self, analysis: &Analysis) -> Result<GpcTrajectory, UqError> {
        let x0 = self.initial_guess()?;
        let mut problem = self.problem();
        let newton = match analysis {
            Analysis::Tran(o) => o.newton,
            _ => self.newton,
        };
        let run = run_analysis(&mut problem, &x0, analysis, &newton).map_err(UqError::engine(Method::St))?;
        let mut stats = run.stats;
        stats.nodes = self.nodes.len();
        Ok(GpcTrajectory {
            method: Method::St,
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
    use crate::engine::{dc_solve, DeterministicProblem};

    const DIODE: &str = "\
V1 a 0 2
R1 a k dist=uniform(900, 1100)
D1 k 0 is=1e-14 temp=gauss(27, 5)
C1 k 0 1n
";

    #[test]
    fn order_zero_is_nominal() {
        let c = StochasticCircuit::from_text(DIODE).unwrap();
        let st = StSolver::new(&c, 0, 1e-2).unwrap();
        let tr = st.solve(&Analysis::Dc).unwrap();
        let p = DeterministicProblem::new(&c, st.nodes.nodes[0].clone());
        let det = dc_solve(&p, &[0.0; 3], &NewtonConfig::default()).unwrap();
        for (a, b) in tr.coeffs[0].iter().zip(&det.x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_matches_dense() {
        let c = StochasticCircuit::from_text(DIODE).unwrap();
        let st = StSolver::new(&c, 3, 1e-2).unwrap();
        let p = st.problem();
        let mut x = st.initial_guess().unwrap();
        // Perturb the higher blocks so every block differs.
        for (i, v) in x.iter_mut().enumerate().skip(3) {
            *v = 1e-3 * ((i * 7919) % 13) as f64;
        }
        let e = p.evaluate(&x, 0.0, 1.0, 1e6).unwrap();
        let r: Vec<f64> = e.fb.iter().map(|v| -v).collect();
        let mut a = r.clone();
        let mut b = r;
        p.solve_decoupled(&e.jac, &mut a).unwrap();
        p.solve_dense(&e.jac, &mut b).unwrap();
        let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        assert!(num / den < 1e-9, "{}", num / den);
    }

    #[test]
    fn hand_two_by_two() {
        // n = 1: a current source into a Gaussian resistor R = 1 + 0.1ξ.
        // Testing nodes ±1 give Φ = [[1, -1], [1, 1]].
        let c = StochasticCircuit::from_text("I1 0 a 1\nR1 a 0 dist=gauss(1, 0.1)\n").unwrap();
        let basis = GpcBasisSet::new(vec![Distribution::Gaussian], 1).unwrap();
        let nodes = TestingNodeSet::from_nodes(&basis, vec![vec![-1.0], vec![1.0]]).unwrap();
        let p = StProblem::new(&c, &nodes);
        let x = [0.0, 0.0];
        let e = p.evaluate(&x, 0.0, 1.0, 0.0).unwrap();
        let mut rhs: Vec<f64> = e.fb.iter().map(|v| -v).collect();
        p.solve_decoupled(&e.jac, &mut rhs).unwrap();
        // Block m solves (1/R(ξᵐ))·z = 1, so z = R(ξᵐ) = 1 ∓ 0.1.
        let (z1, z2) = (0.9, 1.1);
        // Coefficients from Φ⁻¹ = [[1/2, 1/2], [-1/2, 1/2]].
        assert!((rhs[0] - 0.5 * (z1 + z2)).abs() < 1e-14);
        assert!((rhs[1] - 0.5 * (z2 - z1)).abs() < 1e-14);
    }

    #[test]
    fn residual_matches_literal_assembly() {
        let c = StochasticCircuit::from_text(DIODE).unwrap();
        let st = StSolver::new(&c, 2, 1e-2).unwrap();
        let p = st.problem();
        let n = c.dim();
        let k = st.basis.len();
        let x: Vec<f64> = (0..n * k).map(|i| 0.3 * ((i * 31 % 17) as f64 / 17.0 - 0.2)).collect();
        let c0 = 1e5;
        let got = st_residual(&p, &x, 0.0, c0, None).unwrap();
        // Literal: evaluate x̂(ξᵐ) = Σ_k x̂_k H_k(ξᵐ) from the basis directly.
        let mut b = vec![0.0; n];
        c.apply_inputs(&c.inputs(0.0), &mut b);
        for (m, xi) in st.nodes.nodes.iter().enumerate() {
            let h = st.basis.eval(xi).unwrap();
            let mut xm = vec![0.0; n];
            for (kk, hk) in h.iter().enumerate() {
                for i in 0..n {
                    xm[i] += hk * x[kk * n + i];
                }
            }
            let e = c.eval_qf(&xm, xi).unwrap();
            for i in 0..n {
                let want = c0 * e.q[i] + e.f[i] - b[i];
                assert!((got[m * n + i] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn finite_difference_jacobian_factorizes() {
        let c = StochasticCircuit::from_text(DIODE).unwrap();
        let st = StSolver::new(&c, 2, 1e-2).unwrap();
        let p = st.problem();
        let mut x = st.initial_guess().unwrap();
        x[3] = 0.01;
        x[4] = -0.02;
        let c0 = 1e4;
        let e = p.evaluate(&x, 0.0, 1.0, c0).unwrap();
        let analytic = p.coupled_jacobian(&e.jac);
        let dim = x.len();
        for j in 0..dim {
            let h = 1e-6 * x[j].abs().max(1e-3);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let rp = st_residual(&p, &xp, 0.0, c0, None).unwrap();
            let rm = st_residual(&p, &xm, 0.0, c0, None).unwrap();
            for i in 0..dim {
                let fd = (rp[i] - rm[i]) / (2.0 * h);
                let a = analytic[(i, j)];
                assert!((fd - a).abs() <= 1e-5 * a.abs().max(fd.abs()) + 1e-8, "({i},{j}) {fd} vs {a}");
            }
        }
    }

    #[test]
    fn collocation_residual_vanishes_at_nodes() {
        let c = StochasticCircuit::from_text(DIODE).unwrap();
        let st = StSolver::new(&c, 3, 1e-2).unwrap();
        let tr = st.solve(&Analysis::Dc).unwrap();
        let r = st_residual(&st.problem(), &tr.coeffs[0], 0.0, 0.0, None).unwrap();
        let tol = st.newton.abstol + st.newton.reltol * tr.coeffs[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(r.iter().all(|v| v.abs() <= tol));
    }
}
