//! Deterministic DAE kernel shared by every stochastic method.
//!
//! A problem supplies `Q(X)`, `F(X) − s·b(t)` and a Jacobian of
//! `c0·∂Q/∂X + ∂F/∂X`, plus a linear solve for that Jacobian. Every implicit
//! scheme here reduces one step to `R(X) = c0·Q(X) + F(X) − b(t) + r = 0`,
//! where `r` collects the history terms.

pub(crate) mod deterministic;
mod transient;

pub use deterministic::DeterministicProblem;
pub use transient::{Scheme, StepControl, TranOptions, TranPoint, TranResult, Transient};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::norm_inf;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EngineError {
    #[error("model evaluation failed: {0}")]
    Eval(String),
    #[error("singular Jacobian: {0}")]
    Singular(String),
    #[error("Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    NewtonFailed { iterations: usize, residual: f64 },
    #[error("DC operating point not found (last residual {residual:.3e})")]
    DcFailure { residual: f64 },
    #[error("time step underflow at t = {t:.6e} (h = {h:.3e})")]
    TimestepUnderflow { t: f64, h: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Evaluated terms at one iterate.
pub struct Evaluation<J> {
    pub q: Vec<f64>,
    /// `F(X) − s·b(t)`.
    pub fb: Vec<f64>,
    /// Data for `c0·∂Q/∂X + ∂F/∂X`.
    pub jac: J,
}

pub trait DaeProblem: Sync {
    type Jacobian;

    fn dim(&self) -> usize;

    /// `scale` multiplies the sources (used by source stepping).
    fn evaluate(&self, x: &[f64], t: f64, scale: f64, c0: f64) -> Result<Evaluation<Self::Jacobian>, EngineError>;

    /// Solves `J·y = rhs` in place.
    fn solve(&self, jac: &Self::Jacobian, rhs: &mut [f64]) -> Result<(), EngineError>;

    /// Source discontinuities in `(t0, t1]`.
    fn breakpoints(&self, _t0: f64, _t1: f64) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Damping {
    None,
    /// Scale any update whose infinity norm exceeds `max_step`.
    LineLimited { max_step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    pub abstol: f64,
    pub reltol: f64,
    pub max_iters: usize,
    pub damping: Damping,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            abstol: 1e-12,
            reltol: 1e-9,
            max_iters: 100,
            damping: Damping::LineLimited { max_step: 10.0 },
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let ok_damp = match self.damping {
            Damping::None => true,
            Damping::LineLimited { max_step } => max_step > 0.0,
        };
        if self.abstol > 0.0 && self.reltol > 0.0 && self.max_iters >= 1 && ok_damp {
            Ok(())
        } else {
            Err(EngineError::Config(format!("bad Newton settings {self:?}")))
        }
    }

    fn tolerance(&self, x: &[f64]) -> f64 {
        self.abstol + self.reltol * norm_inf(x)
    }
}

/// Fixed data of one nonlinear solve.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub t: f64,
    pub c0: f64,
    pub scale: f64,
    /// History term `r`, or `None` when zero.
    pub hist: Option<&'a [f64]>,
}

impl StepContext<'_> {
    pub fn dc(scale: f64) -> Self {
        StepContext {
            t: 0.0,
            c0: 0.0,
            scale,
            hist: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    /// `Q` at `x`.
    pub q: Vec<f64>,
    /// Number of updates taken before `x` was verified converged.
    pub iterations: usize,
    pub residual: f64,
}

/// Damped Newton. Convergence needs both `‖R(X)‖∞` and the next update's
/// `‖ΔX‖∞` within `abstol + reltol·‖X‖∞`. That last update is applied too
/// unless it would raise the residual.
pub fn newton_solve<P: DaeProblem>(
    problem: &P,
    x0: &[f64],
    ctx: StepContext<'_>,
    cfg: &NewtonConfig,
) -> Result<NewtonOutcome, EngineError> {
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(EngineError::Eval("non-finite initial guess".into()));
    }
    let residual_of = |ev: &Evaluation<P::Jacobian>| -> Vec<f64> {
        let mut r: Vec<f64> = ev.q.iter().zip(&ev.fb).map(|(q, fb)| ctx.c0 * q + fb).collect();
        if let Some(h) = ctx.hist {
            for (ri, hi) in r.iter_mut().zip(h) {
                *ri += hi;
            }
        }
        r
    };
    let mut x = x0.to_vec();
    let mut ev = problem.evaluate(&x, ctx.t, ctx.scale, ctx.c0)?;
    let mut last_res = f64::INFINITY;
    for iter in 0..=cfg.max_iters {
        let mut r = residual_of(&ev);
        let rn = norm_inf(&r);
        last_res = rn;
        for v in r.iter_mut() {
            *v = -*v;
        }
        problem.solve(&ev.jac, &mut r)?;
        let mut dx = r;
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(EngineError::Singular("non-finite Newton update".into()));
        }
        let dn = norm_inf(&dx);
        let tol = cfg.tolerance(&x);
        if rn <= tol && dn <= tol {
            // Apply the final (tiny) update and keep Q consistent with it.
            let polished: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            if let Ok(e) = problem.evaluate(&polished, ctx.t, ctx.scale, ctx.c0) {
                let r2 = norm_inf(&residual_of(&e));
                if r2 <= rn.max(tol) {
                    return Ok(NewtonOutcome {
                        x: polished,
                        q: e.q,
                        iterations: iter,
                        residual: r2,
                    });
                }
            }
            return Ok(NewtonOutcome {
                x,
                q: ev.q,
                iterations: iter,
                residual: rn,
            });
        }
        if iter == cfg.max_iters {
            break;
        }
        if let Damping::LineLimited { max_step } = cfg.damping {
            if dn > max_step {
                let s = max_step / dn;
                dx.iter_mut().for_each(|v| *v *= s);
            }
        }
        // Halve the update while the models refuse the new iterate.
        let base = x.clone();
        let mut frac = 1.0;
        loop {
            for ((xi, bi), di) in x.iter_mut().zip(&base).zip(&dx) {
                *xi = bi + frac * di;
            }
            match problem.evaluate(&x, ctx.t, ctx.scale, ctx.c0) {
                Ok(e) => {
                    ev = e;
                    break;
                }
                Err(EngineError::Eval(msg)) => {
                    frac *= 0.5;
                    if frac < 1e-3 {
                        return Err(EngineError::Eval(msg));
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    Err(EngineError::NewtonFailed {
        iterations: cfg.max_iters,
        residual: last_res,
    })
}

/// Number of source-stepping increments used when direct Newton fails.
pub const SOURCE_STEPS: usize = 10;

#[derive(Debug, Clone)]
pub struct DcOutcome {
    pub x: Vec<f64>,
    pub q: Vec<f64>,
    pub iterations: usize,
    pub source_stepped: bool,
}

/// Operating point: direct Newton, then sources ramped in [`SOURCE_STEPS`] steps.
pub fn dc_solve<P: DaeProblem>(problem: &P, x0: &[f64], cfg: &NewtonConfig) -> Result<DcOutcome, EngineError> {
    cfg.validate()?;
    let mut total = 0;
    let direct = newton_solve(problem, x0, StepContext::dc(1.0), cfg);
    let mut residual = f64::INFINITY;
    match direct {
        Ok(out) => {
            return Ok(DcOutcome {
                x: out.x,
                q: out.q,
                iterations: out.iterations,
                source_stepped: false,
            })
        }
        Err(EngineError::NewtonFailed { iterations, residual: r }) => {
            total += iterations;
            residual = r;
        }
        Err(_) => {}
    }
    let mut x = vec![0.0; problem.dim()];
    let mut q = Vec::new();
    for s in 1..=SOURCE_STEPS {
        let scale = s as f64 / SOURCE_STEPS as f64;
        match newton_solve(problem, &x, StepContext::dc(scale), cfg) {
            Ok(out) => {
                total += out.iterations;
                x = out.x;
                q = out.q;
            }
            Err(EngineError::NewtonFailed { residual: r, .. }) => {
                return Err(EngineError::DcFailure { residual: r });
            }
            Err(_) => return Err(EngineError::DcFailure { residual }),
        }
    }
    Ok(DcOutcome {
        x,
        q,
        iterations: total,
        source_stepped: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    /// `A·x − b = 0`.
    struct Linear {
        a: DMatrix<f64>,
        b: DVector<f64>,
    }

    impl DaeProblem for Linear {
        type Jacobian = DMatrix<f64>;
        fn dim(&self) -> usize {
            self.b.len()
        }
        fn evaluate(&self, x: &[f64], _t: f64, s: f64, _c0: f64) -> Result<Evaluation<DMatrix<f64>>, EngineError> {
            let fb = &self.a * DVector::from_column_slice(x) - &self.b * s;
            Ok(Evaluation {
                q: vec![0.0; x.len()],
                fb: fb.as_slice().to_vec(),
                jac: self.a.clone(),
            })
        }
        fn solve(&self, jac: &DMatrix<f64>, rhs: &mut [f64]) -> Result<(), EngineError> {
            let y = jac
                .clone()
                .lu()
                .solve(&DVector::from_column_slice(rhs))
                .ok_or_else(|| EngineError::Singular("lu".into()))?;
            rhs.copy_from_slice(y.as_slice());
            Ok(())
        }
    }

    /// `x² − 4 = 0`.
    struct Square;

    impl DaeProblem for Square {
        type Jacobian = f64;
        fn dim(&self) -> usize {
            1
        }
        fn evaluate(&self, x: &[f64], _t: f64, s: f64, _c0: f64) -> Result<Evaluation<f64>, EngineError> {
            Ok(Evaluation {
                q: vec![0.0],
                fb: vec![x[0] * x[0] - 4.0 * s],
                jac: 2.0 * x[0],
            })
        }
        fn solve(&self, jac: &f64, rhs: &mut [f64]) -> Result<(), EngineError> {
            rhs[0] /= jac;
            Ok(())
        }
    }

    #[test]
    fn linear_takes_one_iteration() {
        let p = Linear {
            a: DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]),
            b: DVector::from_column_slice(&[1.0, 2.0]),
        };
        let cfg = NewtonConfig {
            damping: Damping::None,
            ..Default::default()
        };
        let out = newton_solve(&p, &[0.0, 0.0], StepContext::dc(1.0), &cfg).unwrap();
        assert_eq!(out.iterations, 1);
        assert!((out.x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((out.x[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn square_root_of_four() {
        let out = newton_solve(&Square, &[3.0], StepContext::dc(1.0), &NewtonConfig::default()).unwrap();
        assert!((out.x[0] - 2.0).abs() < 1e-12);
        assert!(out.iterations <= 6, "{}", out.iterations);
    }

    #[test]
    fn singular_is_reported() {
        let p = Linear {
            a: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]),
            b: DVector::from_column_slice(&[1.0, 0.0]),
        };
        let err = dc_solve(&p, &[0.0, 0.0], &NewtonConfig::default()).unwrap_err();
        assert!(matches!(err, EngineError::DcFailure { .. }), "{err:?}");
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = NewtonConfig {
            max_iters: 0,
            ..Default::default()
        };
        assert!(matches!(dc_solve(&Square, &[1.0], &cfg), Err(EngineError::Config(_))));
    }
}
