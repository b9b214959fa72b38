use nalgebra::{DMatrix, DVector};

use super::{DaeProblem, EngineError, Evaluation};
use crate::circuit::{QfEval, StochasticCircuit};

/// The circuit at one fixed germ value `ξ`.
#[derive(Debug, Clone)]
pub struct DeterministicProblem<'a> {
    pub circuit: &'a StochasticCircuit,
    pub xi: Vec<f64>,
    /// Sources held at a fixed value, for DC sweeps: `(source index, value)`.
    pub overrides: Vec<(usize, f64)>,
}

impl<'a> DeterministicProblem<'a> {
    pub fn new(circuit: &'a StochasticCircuit, xi: Vec<f64>) -> Self {
        DeterministicProblem {
            circuit,
            xi,
            overrides: Vec::new(),
        }
    }
}

/// `s·B·u(t)` with overrides applied.
pub(crate) fn source_vector(circuit: &StochasticCircuit, overrides: &[(usize, f64)], t: f64, scale: f64) -> Vec<f64> {
    let mut u = circuit.inputs(t);
    for &(i, v) in overrides {
        u[i] = v;
    }
    for v in u.iter_mut() {
        *v *= scale;
    }
    let mut b = vec![0.0; circuit.dim()];
    circuit.apply_inputs(&u, &mut b);
    b
}

pub(crate) fn lu_solve(jac: &DMatrix<f64>, rhs: &mut [f64]) -> Result<(), EngineError> {
    let lu = jac.clone().lu();
    let y = lu
        .solve(&DVector::from_column_slice(rhs))
        .ok_or_else(|| EngineError::Singular("zero pivot in circuit Jacobian".into()))?;
    rhs.copy_from_slice(y.as_slice());
    Ok(())
}

impl DaeProblem for DeterministicProblem<'_> {
    type Jacobian = DMatrix<f64>;

    fn dim(&self) -> usize {
        self.circuit.dim()
    }

    fn evaluate(&self, x: &[f64], t: f64, scale: f64, c0: f64) -> Result<Evaluation<DMatrix<f64>>, EngineError> {
        let n = self.dim();
        let mut e = QfEval::zeros(n);
        self.circuit
            .eval_into(x, &self.xi, &mut e)
            .map_err(|err| EngineError::Eval(err.to_string()))?;
        let b = source_vector(self.circuit, &self.overrides, t, scale);
        let fb: Vec<f64> = e.f.iter().zip(&b).map(|(f, b)| f - b).collect();
        let jac = if c0 != 0.0 { e.df + e.dq * c0 } else { e.df };
        Ok(Evaluation {
            q: e.q.as_slice().to_vec(),
            fb,
            jac,
        })
    }

    fn solve(&self, jac: &DMatrix<f64>, rhs: &mut [f64]) -> Result<(), EngineError> {
        lu_solve(jac, rhs)
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.circuit.breakpoints(t0, t1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::devices::{diode, thermal_voltage};
    use crate::engine::{dc_solve, NewtonConfig};

    fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn equal_divider() {
        let c = StochasticCircuit::from_text("V1 a 0 3\nR1 a m 1k\nR2 m 0 1k\n").unwrap();
        let p = DeterministicProblem::new(&c, vec![]);
        let out = dc_solve(&p, &[0.0; 3], &NewtonConfig::default()).unwrap();
        assert!((out.x[c.state_index("m").unwrap()] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn diode_matches_bisection() {
        let c = StochasticCircuit::from_text("V1 a 0 5\nR1 a k 1k\nD1 k 0 is=1e-14 n=1.2\n").unwrap();
        let p = DeterministicProblem::new(&c, vec![]);
        let out = dc_solve(&p, &[0.0; 3], &NewtonConfig::default()).unwrap();
        let nvt = 1.2 * thermal_voltage(27.0);
        let v = bisect(|v| (5.0 - v) / 1e3 - diode(1e-14, nvt, v).0, 0.0, 5.0);
        assert!((out.x[1] - v).abs() < 1e-9, "{} vs {v}", out.x[1]);
        assert!(!out.source_stepped);
    }

    #[test]
    fn floating_node_fails_dc() {
        let c = StochasticCircuit::from_text("V1 a 0 1\nR1 a b 1k\nC1 b c 1p\nC2 c 0 1p\n").unwrap();
        let p = DeterministicProblem::new(&c, vec![]);
        let err = dc_solve(&p, &[0.0; 4], &NewtonConfig::default()).unwrap_err();
        assert!(matches!(err, EngineError::DcFailure { .. }));
    }

    #[test]
    fn sweep_override() {
        let c = StochasticCircuit::from_text("V1 a 0 3\nR1 a m 1k\nR2 m 0 1k\n").unwrap();
        let mut p = DeterministicProblem::new(&c, vec![]);
        p.overrides = vec![(0, 5.0)];
        let out = dc_solve(&p, &[0.0; 3], &NewtonConfig::default()).unwrap();
        assert!((out.x[1] - 2.5).abs() < 1e-12);
    }
}
