//! Implicit time stepping with LTE control.
//!
//! Local truncation error is estimated from divided differences of the
//! solution over the new point and its history (`D2`, `D3`), with `h` the new
//! step and `hp` the previous one:
//!
//! | scheme | estimate                    |
//! |--------|-----------------------------|
//! | BE     | `h²·D2`                     |
//! | TR     | `h³·D3/2`                   |
//! | Gear-2 | `D3·h²(h+hp)²/(2h+hp)`      |
//!
//! A step is accepted when `max_i |lte_i| / (lte_tol·|x_i| + lte_abstol) ≤ 1`.
//! Until enough history exists the second-order schemes fall back to the
//! `h²·D2` estimate. The start and every breakpoint are corners where
//! algebraic unknowns may jump, so they are left out of the differences:
//! the first step after one is taken with backward Euler from `h_init` and
//! the first two carry no estimate.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{newton_solve, DaeProblem, EngineError, NewtonConfig, StepContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[serde(rename = "be")]
    BackwardEuler,
    #[serde(rename = "tr")]
    Trapezoidal,
    Gear2,
}

impl Scheme {
    pub fn order(self) -> usize {
        match self {
            Scheme::BackwardEuler => 1,
            Scheme::Trapezoidal | Scheme::Gear2 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub scheme: Scheme,
    pub lte_tol: f64,
    pub lte_abstol: f64,
    /// First step and the step after every breakpoint. Defaults to `1e-6·t_stop`.
    pub h_init: Option<f64>,
    /// Defaults to `1e-14·t_stop`.
    pub h_min: Option<f64>,
    /// Defaults to `t_stop/50`.
    pub h_max: Option<f64>,
    pub grow: f64,
    pub shrink: f64,
    /// Take every step with this size; LTE is recorded but not enforced.
    /// Breakpoints are not stepped to, but one that falls on the grid
    /// restarts the history as in adaptive mode.
    pub fixed_step: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            scheme: Scheme::Gear2,
            lte_tol: 1e-4,
            lte_abstol: 1e-6,
            h_init: None,
            h_min: None,
            h_max: None,
            grow: 2.0,
            shrink: 0.5,
            fixed_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranOptions {
    pub t_stop: f64,
    pub control: StepControl,
    pub newton: NewtonConfig,
}

impl TranOptions {
    pub fn new(t_stop: f64) -> Self {
        TranOptions {
            t_stop,
            control: StepControl::default(),
            newton: NewtonConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranPoint {
    pub t: f64,
    pub x: Vec<f64>,
    /// Step that produced this point; zero for the initial point.
    pub h: f64,
    pub newton_iters: usize,
    /// LTE estimate over its tolerance.
    pub lte_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranResult {
    pub points: Vec<TranPoint>,
    pub accepted: usize,
    pub rejected: usize,
    pub newton_iters: usize,
    pub max_lte_ratio: f64,
}

#[derive(Debug, Clone)]
struct Hist {
    t: f64,
    x: Vec<f64>,
    q: Vec<f64>,
    /// Discrete `dQ/dt` at this point.
    qdot: Vec<f64>,
    /// The start or a breakpoint: algebraic unknowns such as source
    /// currents may jump here, so the point is left out of LTE estimates.
    corner: bool,
}

const HISTORY: usize = 4;

/// A resumable transient run. Cloning captures a checkpoint.
pub struct Transient<'p, P: DaeProblem> {
    problem: &'p P,
    opts: TranOptions,
    t: f64,
    h: f64,
    h_min: f64,
    h_max: f64,
    h_init: f64,
    hist: VecDeque<Hist>,
    accepted: usize,
    rejected: usize,
    newton_iters: usize,
    max_ratio: f64,
}

impl<P: DaeProblem> Clone for Transient<'_, P> {
    fn clone(&self) -> Self {
        Transient {
            problem: self.problem,
            opts: self.opts,
            t: self.t,
            h: self.h,
            h_min: self.h_min,
            h_max: self.h_max,
            h_init: self.h_init,
            hist: self.hist.clone(),
            accepted: self.accepted,
            rejected: self.rejected,
            newton_iters: self.newton_iters,
            max_ratio: self.max_ratio,
        }
    }
}

/// Second and third divided differences of the newest points.
fn divided(ts: &[f64], xs: &[&[f64]], i: usize) -> f64 {
    // Newton's table on the given points, returning the top coefficient.
    let m = ts.len();
    let mut d: Vec<f64> = xs.iter().map(|x| x[i]).collect();
    for level in 1..m {
        for j in (level..m).rev() {
            d[j] = (d[j] - d[j - 1]) / (ts[j] - ts[j - level]);
        }
    }
    d[m - 1]
}

impl<'p, P: DaeProblem> Transient<'p, P> {
    /// Starts from a consistent point `x0` with charges `q0`.
    pub fn new(problem: &'p P, x0: Vec<f64>, q0: Vec<f64>, opts: TranOptions) -> Result<Self, EngineError> {
        let c = &opts.control;
        let t_stop = opts.t_stop;
        if !(t_stop > 0.0) || !(c.lte_tol > 0.0) || !(c.lte_abstol > 0.0) || !(c.grow >= 1.0) {
            return Err(EngineError::Config("t_stop, lte tolerances must be positive and grow ≥ 1".into()));
        }
        if !(c.shrink > 0.0 && c.shrink < 1.0) {
            return Err(EngineError::Config("shrink must lie in (0, 1)".into()));
        }
        if c.fixed_step.is_some_and(|h| !(h > 0.0)) {
            return Err(EngineError::Config("fixed step must be positive".into()));
        }
        opts.newton.validate()?;
        let h_max = c.h_max.unwrap_or(t_stop / 50.0);
        let h_init = c.h_init.unwrap_or(1e-6 * t_stop).min(h_max);
        let h_min = c.h_min.unwrap_or(1e-14 * t_stop).min(h_init);
        let n = x0.len();
        let mut hist = VecDeque::with_capacity(HISTORY);
        hist.push_back(Hist {
            t: 0.0,
            x: x0,
            q: q0,
            qdot: vec![0.0; n],
            corner: true,
        });
        Ok(Transient {
            problem,
            opts,
            t: 0.0,
            h: h_init,
            h_min,
            h_max,
            h_init,
            hist,
            accepted: 0,
            rejected: 0,
            newton_iters: 0,
            max_ratio: 0.0,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.hist.back().expect("history is never empty").x
    }

    pub fn initial_point(&self) -> TranPoint {
        TranPoint {
            t: self.t,
            x: self.state().to_vec(),
            h: 0.0,
            newton_iters: 0,
            lte_ratio: 0.0,
        }
    }

    pub fn finished(&self) -> bool {
        self.t >= self.opts.t_stop * (1.0 - 1e-12)
    }

    /// `(ratio, order of the estimate)` for a candidate point.
    fn lte(&self, t_new: f64, x_new: &[f64], method: Scheme) -> (f64, usize) {
        let c = &self.opts.control;
        let smooth = self.hist.iter().skip_while(|h| h.corner);
        let mut ts: Vec<f64> = smooth.clone().map(|h| h.t).collect();
        let mut xs: Vec<&[f64]> = smooth.map(|h| h.x.as_slice()).collect();
        ts.push(t_new);
        xs.push(x_new);
        let m = ts.len();
        if m < 3 {
            return (0.0, method.order());
        }
        let h = t_new - ts[m - 2];
        let hp = ts[m - 2] - ts[m - 3];
        let third = method.order() == 2 && m >= 4;
        let (ts, xs) = if third {
            (&ts[m - 4..], &xs[m - 4..])
        } else {
            (&ts[m - 3..], &xs[m - 3..])
        };
        let prev = xs[xs.len() - 2];
        let mut ratio: f64 = 0.0;
        for i in 0..x_new.len() {
            let d = divided(ts, xs, i);
            let est = if !third {
                h * h * d
            } else if method == Scheme::Trapezoidal {
                0.5 * h * h * h * d
            } else {
                d * h * h * (h + hp) * (h + hp) / (2.0 * h + hp)
            };
            let scale = c.lte_tol * x_new[i].abs().max(prev[i].abs()) + c.lte_abstol;
            ratio = ratio.max(est.abs() / scale);
        }
        (ratio, if third { 2 } else { 1 })
    }

    /// Advances by one accepted step; `None` once `t_stop` is reached.
    pub fn step(&mut self) -> Result<Option<TranPoint>, EngineError> {
        if self.finished() {
            return Ok(None);
        }
        let c = self.opts.control;
        let t_stop = self.opts.t_stop;
        let fixed = c.fixed_step;
        let next_bp = if fixed.is_none() {
            self.problem
                .breakpoints(self.t + self.h_min, t_stop)
                .into_iter()
                .next()
        } else {
            None
        };
        let target = next_bp.unwrap_or(t_stop).min(t_stop);
        let mut h = fixed.unwrap_or(self.h).min(self.h_max.max(fixed.unwrap_or(0.0)));
        loop {
            let mut hits = false;
            if self.t + h >= target - 0.01 * h {
                h = target - self.t;
                hits = true;
            }
            if fixed.is_none() && h < self.h_min {
                return Err(EngineError::TimestepUnderflow { t: self.t, h });
            }
            // Grid times come from the step index: summing h drifts far
            // enough over 10^5 steps to miss breakpoints that lie on the grid.
            let t_new = match fixed {
                Some(hf) if !hits => (self.accepted + 1) as f64 * hf,
                _ if hits => target,
                _ => self.t + h,
            };
            h = t_new - self.t;
            let method = if self.hist.len() < 2 {
                Scheme::BackwardEuler
            } else {
                c.scheme
            };
            let last = self.hist.back().expect("history");
            let n = last.x.len();
            let (c0, hist_term) = match method {
                Scheme::BackwardEuler => {
                    let c0 = 1.0 / h;
                    (c0, last.q.iter().map(|q| -c0 * q).collect::<Vec<f64>>())
                }
                Scheme::Trapezoidal => {
                    let c0 = 2.0 / h;
                    (c0, (0..n).map(|i| -c0 * last.q[i] - last.qdot[i]).collect())
                }
                Scheme::Gear2 => {
                    let before = &self.hist[self.hist.len() - 2];
                    let hp = last.t - before.t;
                    let c0 = (2.0 * h + hp) / (h * (h + hp));
                    let c1 = -(h + hp) / (h * hp);
                    let c2 = h / (hp * (h + hp));
                    (c0, (0..n).map(|i| c1 * last.q[i] + c2 * before.q[i]).collect())
                }
            };
            let ctx = StepContext {
                t: t_new,
                c0,
                scale: 1.0,
                hist: Some(&hist_term),
            };
            let out = match newton_solve(self.problem, &last.x, ctx, &self.opts.newton) {
                Ok(out) => out,
                Err(e @ (EngineError::NewtonFailed { .. } | EngineError::Eval(_) | EngineError::Singular(_))) => {
                    if fixed.is_some() {
                        return Err(e);
                    }
                    self.rejected += 1;
                    h *= c.shrink;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let (ratio, est_order) = self.lte(t_new, &out.x, method);
            if fixed.is_none() && ratio > 1.0 {
                self.rejected += 1;
                let f = (0.9 * ratio.powf(-1.0 / (est_order as f64 + 1.0))).clamp(0.1, c.shrink);
                h *= f;
                continue;
            }
            self.newton_iters += out.iterations;
            self.accepted += 1;
            self.max_ratio = self.max_ratio.max(ratio);
            let qdot: Vec<f64> = (0..n).map(|i| c0 * out.q[i] + hist_term[i]).collect();
            let point = TranPoint {
                t: t_new,
                x: out.x.clone(),
                h: t_new - self.t,
                newton_iters: out.iterations,
                lte_ratio: ratio,
            };
            self.t = t_new;
            let restart = match fixed {
                None => hits && next_bp.is_some_and(|bp| bp == target),
                // The grid stays uniform; a breakpoint landing on it still
                // drops the history that straddles the corner.
                Some(hf) => self
                    .problem
                    .breakpoints(t_new - 1e-6 * hf, t_new + 1e-6 * hf)
                    .iter()
                    .any(|bp| (bp - t_new).abs() <= 1e-6 * hf),
            };
            if restart {
                self.hist.clear();
            }
            self.hist.push_back(Hist {
                t: t_new,
                x: out.x,
                q: out.q,
                qdot,
                corner: restart,
            });
            while self.hist.len() > HISTORY {
                self.hist.pop_front();
            }
            let grow = if ratio > 0.0 {
                (0.9 * ratio.powf(-1.0 / (est_order as f64 + 1.0))).clamp(c.shrink, c.grow)
            } else {
                c.grow
            };
            self.h = (h * grow).min(self.h_max);
            if restart {
                self.h = self.h.min(self.h_init);
            }
            return Ok(Some(point));
        }
    }

    /// Runs to `t_stop`, returning every accepted point including the start.
    pub fn run(mut self) -> Result<TranResult, EngineError> {
        let mut points = vec![self.initial_point()];
        while let Some(p) = self.step()? {
            points.push(p);
        }
        Ok(TranResult {
            points,
            accepted: self.accepted,
            rejected: self.rejected,
            newton_iters: self.newton_iters,
            max_lte_ratio: self.max_ratio,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{dc_solve, DeterministicProblem, Evaluation};

    /// `τ·x' + x = 0` written as `q = τx`, `f = x`.
    struct Decay {
        tau: Vec<f64>,
    }

    impl DaeProblem for Decay {
        type Jacobian = Vec<f64>;
        fn dim(&self) -> usize {
            self.tau.len()
        }
        fn evaluate(&self, x: &[f64], _t: f64, _s: f64, c0: f64) -> Result<Evaluation<Vec<f64>>, EngineError> {
            Ok(Evaluation {
                q: x.iter().zip(&self.tau).map(|(x, t)| x * t).collect(),
                fb: x.to_vec(),
                jac: self.tau.iter().map(|t| c0 * t + 1.0).collect(),
            })
        }
        fn solve(&self, jac: &Vec<f64>, rhs: &mut [f64]) -> Result<(), EngineError> {
            for (r, j) in rhs.iter_mut().zip(jac) {
                *r /= j;
            }
            Ok(())
        }
    }

    fn run_decay(scheme: Scheme, h: f64) -> f64 {
        let p = Decay { tau: vec![1.0] };
        let mut opts = TranOptions::new(1.0);
        opts.control.scheme = scheme;
        opts.control.fixed_step = Some(h);
        let r = Transient::new(&p, vec![1.0], vec![1.0], opts).unwrap().run().unwrap();
        let last = r.points.last().unwrap();
        assert!((last.t - 1.0).abs() < 1e-12);
        (last.x[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn fixed_grid_times_do_not_drift() {
        let p = Decay { tau: vec![1.0] };
        let h = 1.0 / 3000.0;
        let mut opts = TranOptions::new(1.0);
        opts.control.fixed_step = Some(h);
        let r = Transient::new(&p, vec![1.0], vec![1.0], opts).unwrap().run().unwrap();
        assert_eq!(r.points.len(), 3001);
        for (i, pt) in r.points.iter().enumerate().take(3000) {
            assert_eq!(pt.t, i as f64 * h);
        }
    }

    #[test]
    fn backward_euler_is_first_order() {
        let ratio = run_decay(Scheme::BackwardEuler, 0.01) / run_decay(Scheme::BackwardEuler, 0.005);
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn gear2_is_second_order() {
        let ratio = run_decay(Scheme::Gear2, 0.01) / run_decay(Scheme::Gear2, 0.005);
        assert!((ratio - 4.0).abs() < 0.8, "{ratio}");
    }

    #[test]
    fn trapezoidal_is_second_order() {
        let ratio = run_decay(Scheme::Trapezoidal, 0.01) / run_decay(Scheme::Trapezoidal, 0.005);
        assert!((ratio - 4.0).abs() < 0.8, "{ratio}");
    }

    #[test]
    fn adaptive_steps_meet_tolerance() {
        let p = Decay { tau: vec![1.0, 0.1] };
        let mut opts = TranOptions::new(5.0);
        opts.control.lte_tol = 1e-6;
        opts.control.lte_abstol = 1e-9;
        let r = Transient::new(&p, vec![1.0, 1.0], vec![1.0, 0.1], opts).unwrap().run().unwrap();
        assert!(r.points.iter().all(|p| p.lte_ratio <= 1.0));
        assert!(r.points.windows(2).all(|w| w[1].t > w[0].t));
        let last = r.points.last().unwrap();
        assert!((last.x[0] - (-5.0f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn stiff_adaptive_beats_fixed_minimum_step() {
        // Time constants 1e-6 and 1: the fast mode dies out quickly.
        let p = Decay { tau: vec![1e-6, 1.0] };
        let t_stop = 1.0;
        let mut opts = TranOptions::new(t_stop);
        opts.control.h_init = Some(1e-9);
        let adaptive = Transient::new(&p, vec![1.0, 1.0], vec![1e-6, 1.0], opts).unwrap().run().unwrap();
        // The fixed grid taking the smallest step the adaptive run used.
        let h_min = adaptive.points.iter().skip(1).map(|p| p.h).fold(f64::INFINITY, f64::min);
        let fixed_steps = (t_stop / h_min).ceil() as usize;
        assert!(fixed_steps >= 10 * adaptive.accepted, "{fixed_steps} vs {}", adaptive.accepted);
    }

    #[test]
    fn lte_bounds_true_error() {
        // Local error of each step measured against the exact flow from the
        // previous accepted point.
        let p = Decay { tau: vec![1.0] };
        let mut opts = TranOptions::new(3.0);
        opts.control.lte_tol = 1e-5;
        opts.control.lte_abstol = 1e-8;
        let r = Transient::new(&p, vec![1.0], vec![1.0], opts).unwrap().run().unwrap();
        let c = opts.control;
        let mut good = 0;
        let mut total = 0;
        for w in r.points.windows(2).skip(3) {
            let exact = w[0].x[0] * (-(w[1].t - w[0].t)).exp();
            let true_err = (w[1].x[0] - exact).abs();
            let est = w[1].lte_ratio * (c.lte_tol * w[1].x[0].abs().max(w[0].x[0].abs()) + c.lte_abstol);
            total += 1;
            if true_err <= 10.0 * est {
                good += 1;
            }
        }
        assert!(good as f64 >= 0.95 * total as f64, "{good}/{total}");
    }

    #[test]
    fn resume_from_checkpoint_is_bit_identical() {
        let c = crate::circuit::StochasticCircuit::from_text(
            "V1 a 0 PULSE(0 1 1u 0.1u 0.1u 2u 5u)\nR1 a b 1k\nC1 b 0 1n\nD1 b 0\n",
        )
        .unwrap();
        let p = DeterministicProblem::new(&c, vec![]);
        let dc = dc_solve(&p, &vec![0.0; c.dim()], &NewtonConfig::default()).unwrap();
        let mut run = Transient::new(&p, dc.x, dc.q, TranOptions::new(10e-6)).unwrap();
        for _ in 0..15 {
            run.step().unwrap();
        }
        let checkpoint = run.clone();
        let a = run.run().unwrap();
        let b = checkpoint.run().unwrap();
        assert_eq!(a.points, b.points);
        assert!(a.points.len() > 10);
    }

    #[test]
    fn rc_schemes_agree_with_closed_form() {
        let c = crate::circuit::StochasticCircuit::from_text("V1 a 0 PWL(0 1 1 1)\nR1 a b 1k\nC1 b 0 1u\nR2 b 0 1meg\n")
            .unwrap();
        let p = DeterministicProblem::new(&c, vec![]);
        // Start discharged by hand: x = [1, 0, -1e-3].
        let x0 = vec![1.0, 0.0, -1e-3];
        let q0 = vec![0.0, 0.0, 0.0];
        let g = 1e-3 + 1e-6;
        let (vinf, tau) = (1e-3 / g, 1e-6 / g);
        for scheme in [Scheme::BackwardEuler, Scheme::Trapezoidal, Scheme::Gear2] {
            let mut opts = TranOptions::new(5e-3);
            opts.control.scheme = scheme;
            opts.control.lte_tol = 1e-6;
            opts.control.lte_abstol = 1e-9;
            let r = Transient::new(&p, x0.clone(), q0.clone(), opts).unwrap().run().unwrap();
            let worst = r
                .points
                .iter()
                .map(|pt| (pt.x[1] - vinf * (1.0 - (-pt.t / tau).exp())).abs())
                .fold(0.0, f64::max);
            // Local errors accumulate to a global error of the scheme's order.
            let bound = if scheme == Scheme::BackwardEuler { 1e-3 } else { 2e-4 };
            assert!(worst < bound, "{scheme:?} {worst}");
        }
    }

    #[test]
    fn underflow_is_reported() {
        struct Never;
        impl DaeProblem for Never {
            type Jacobian = ();
            fn dim(&self) -> usize {
                1
            }
            fn evaluate(&self, _x: &[f64], t: f64, _s: f64, _c0: f64) -> Result<Evaluation<()>, EngineError> {
                if t > 0.5 {
                    Err(EngineError::Eval("boom".into()))
                } else {
                    Ok(Evaluation {
                        q: vec![0.0],
                        fb: vec![0.0],
                        jac: (),
                    })
                }
            }
            fn solve(&self, _j: &(), _r: &mut [f64]) -> Result<(), EngineError> {
                Ok(())
            }
        }
        let err = Transient::new(&Never, vec![0.0], vec![0.0], TranOptions::new(1.0))
            .unwrap()
            .run()
            .unwrap_err();
        assert!(matches!(err, EngineError::TimestepUnderflow { t, .. } if t <= 0.5));
    }
}
