//! Standard germ distributions and their three-term recurrences.
//!
//! | Family   | Density on the support                         | Support   | Polynomials |
//! |----------|------------------------------------------------|-----------|-------------|
//! | Gaussian | exp(-x²/2)/√(2π)                               | ℝ         | Hermite     |
//! | Gamma    | x^(γ-1) e^(-x) / Γ(γ)                          | [0, ∞)    | Laguerre    |
//! | Beta     | x^(α-1) (1-x)^(β-1) / B(α, β)                  | [0, 1]    | Jacobi      |
//! | Uniform  | 1/2                                            | [-1, 1]   | Legendre    |
//!
//! Every weight is a probability density, so `b_0 = 1` and the squared norm of
//! the monic polynomial `π_j` is `b_1·b_2·…·b_j`.

use rand::Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::BasisError;

/// Slack used when checking that a point lies inside a bounded support.
const SUPPORT_SLACK: f64 = 1e-12;

/// A standard germ distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Distribution {
    Gaussian,
    Gamma { shape: f64 },
    Beta { alpha: f64, beta: f64 },
    Uniform,
}

impl Distribution {
    pub fn gamma(shape: f64) -> Result<Self, BasisError> {
        let d = Distribution::Gamma { shape };
        d.validate()?;
        Ok(d)
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self, BasisError> {
        let d = Distribution::Beta { alpha, beta };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), BasisError> {
        match *self {
            Distribution::Gamma { shape } if !(shape > 0.0 && shape.is_finite()) => {
                Err(BasisError::InvalidDistribution(format!(
                    "gamma shape must be positive, got {shape}"
                )))
            }
            Distribution::Beta { alpha, beta }
                if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) =>
            {
                Err(BasisError::InvalidDistribution(format!(
                    "beta parameters must be positive, got alpha={alpha} beta={beta}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Gaussian => "gaussian",
            Distribution::Gamma { .. } => "gamma",
            Distribution::Beta { .. } => "beta",
            Distribution::Uniform => "uniform",
        }
    }

    /// Closed support interval (infinite ends are `±inf`).
    pub fn support(&self) -> (f64, f64) {
        match self {
            Distribution::Gaussian => (f64::NEG_INFINITY, f64::INFINITY),
            Distribution::Gamma { .. } => (0.0, f64::INFINITY),
            Distribution::Beta { .. } => (0.0, 1.0),
            Distribution::Uniform => (-1.0, 1.0),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        x.is_finite() && x >= lo - SUPPORT_SLACK && x <= hi + SUPPORT_SLACK
    }

    /// Whether the density is symmetric about its mean.
    pub fn is_symmetric(&self) -> bool {
        match *self {
            Distribution::Gaussian | Distribution::Uniform => true,
            Distribution::Beta { alpha, beta } => alpha == beta,
            Distribution::Gamma { .. } => false,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Gaussian | Distribution::Uniform => 0.0,
            Distribution::Gamma { shape } => shape,
            Distribution::Beta { alpha, beta } => alpha / (alpha + beta),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::Gaussian => 1.0,
            Distribution::Uniform => 1.0 / 3.0,
            Distribution::Gamma { shape } => shape,
            Distribution::Beta { alpha, beta } => {
                let s = alpha + beta;
                alpha * beta / (s * s * (s + 1.0))
            }
        }
    }

    /// Probability density at `x`; zero outside the support.
    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return 0.0;
        }
        match *self {
            Distribution::Gaussian => (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Distribution::Uniform => 0.5,
            Distribution::Gamma { shape } => {
                if x == 0.0 {
                    return if shape < 1.0 {
                        f64::INFINITY
                    } else if shape == 1.0 {
                        1.0
                    } else {
                        0.0
                    };
                }
                ((shape - 1.0) * x.ln() - x - ln_gamma(shape)).exp()
            }
            Distribution::Beta { alpha, beta } => {
                let ln_b = ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta);
                let term = |e: f64, y: f64| if e == 0.0 { 0.0 } else { e * y.ln() };
                (term(alpha - 1.0, x) + term(beta - 1.0, 1.0 - x) - ln_b).exp()
            }
        }
    }

    /// Draw one germ value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Gaussian => StandardNormal.sample(rng),
            Distribution::Uniform => rng.random_range(-1.0..=1.0),
            Distribution::Gamma { shape } => rand_distr::Gamma::new(shape, 1.0)
                .expect("validated gamma shape")
                .sample(rng),
            Distribution::Beta { alpha, beta } => rand_distr::Beta::new(alpha, beta)
                .expect("validated beta parameters")
                .sample(rng),
        }
    }

    /// Monic recurrence coefficients `a_0..a_{d}` and `b_0..b_{d}`.
    pub fn recurrence(&self, max_degree: usize) -> Result<Recurrence, BasisError> {
        self.validate()?;
        let len = max_degree + 1;
        let mut a = Vec::with_capacity(len);
        let mut b = Vec::with_capacity(len);
        for j in 0..len {
            let jf = j as f64;
            let (aj, bj) = match *self {
                Distribution::Gaussian => (0.0, if j == 0 { 1.0 } else { jf }),
                Distribution::Uniform => (
                    0.0,
                    if j == 0 {
                        1.0
                    } else {
                        jf * jf / (4.0 * jf * jf - 1.0)
                    },
                ),
                // Generalized Laguerre with exponent γ-1.
                Distribution::Gamma { shape } => (
                    2.0 * jf + shape,
                    if j == 0 { 1.0 } else { jf * (jf + shape - 1.0) },
                ),
                Distribution::Beta { alpha, beta } => beta_recurrence(alpha, beta, j),
            };
            a.push(aj);
            b.push(bj);
        }
        Ok(Recurrence { a, b })
    }
}

/// Jacobi recurrence written directly for the weight x^(α-1)(1-x)^(β-1) on [0, 1].
fn beta_recurrence(alpha: f64, beta: f64, j: usize) -> (f64, f64) {
    let s = alpha + beta;
    let n = j as f64;
    let a = if j == 0 {
        alpha / s
    } else {
        let t = 2.0 * n + s - 2.0;
        0.5 * (1.0 + ((alpha - 1.0).powi(2) - (beta - 1.0).powi(2)) / (t * (t + 2.0)))
    };
    let b = match j {
        0 => 1.0,
        1 => alpha * beta / (s * s * (s + 1.0)),
        _ => {
            let t = 2.0 * n + s - 2.0;
            n * (n + alpha - 1.0) * (n + beta - 1.0) * (n + s - 2.0)
                / (t * t * (t + 1.0) * (t - 1.0))
        }
    };
    (a, b)
}

/// Monic three-term recurrence `π_{j+1} = (x - a_j) π_j - b_j π_{j-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recurrence {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Recurrence {
    pub fn max_degree(&self) -> usize {
        self.a.len() - 1
    }

    /// Squared norm of the monic polynomial of degree `j` under the density.
    pub fn norm_sq(&self, j: usize) -> f64 {
        self.b[1..=j].iter().product()
    }

    /// Orthonormal values `φ_0(x)..φ_degree(x)` written into `out`.
    pub fn orthonormal_into(&self, x: f64, out: &mut [f64]) {
        let degree = out.len().saturating_sub(1);
        debug_assert!(degree <= self.max_degree() + 1 || out.is_empty());
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        if degree == 0 {
            return;
        }
        out[1] = (x - self.a[0]) / self.b[1].sqrt();
        for j in 1..degree {
            out[j + 1] =
                ((x - self.a[j]) * out[j] - self.b[j].sqrt() * out[j - 1]) / self.b[j + 1].sqrt();
        }
    }

    pub fn orthonormal(&self, x: f64, degree: usize) -> Vec<f64> {
        let mut out = vec![0.0; degree + 1];
        self.orthonormal_into(x, &mut out);
        out
    }

    /// Monic values `π_0(x)..π_degree(x)`.
    pub fn monic(&self, x: f64, degree: usize) -> Vec<f64> {
        let mut out = vec![0.0; degree + 1];
        out[0] = 1.0;
        if degree >= 1 {
            out[1] = x - self.a[0];
        }
        for j in 1..degree {
            out[j + 1] = (x - self.a[j]) * out[j] - self.b[j] * out[j - 1];
        }
        out
    }
}

/// A named physical parameter `θ = shift + scale·ξ` driven by a standard germ `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomParameter {
    pub name: String,
    pub dist: Distribution,
    pub shift: f64,
    pub scale: f64,
}

impl RandomParameter {
    pub fn new(
        name: impl Into<String>,
        dist: Distribution,
        shift: f64,
        scale: f64,
    ) -> Result<Self, BasisError> {
        dist.validate()?;
        let name = name.into();
        if scale == 0.0 || !scale.is_finite() || !shift.is_finite() {
            return Err(BasisError::InvalidDistribution(format!(
                "parameter {name}: scale must be finite and non-zero, shift finite"
            )));
        }
        Ok(RandomParameter {
            name,
            dist,
            shift,
            scale,
        })
    }

    /// `gauss(mu, sigma)`
    pub fn gauss(name: impl Into<String>, mu: f64, sigma: f64) -> Result<Self, BasisError> {
        Self::new(name, Distribution::Gaussian, mu, sigma)
    }

    /// `uniform(lo, hi)`
    pub fn uniform(name: impl Into<String>, lo: f64, hi: f64) -> Result<Self, BasisError> {
        if !(hi > lo) {
            return Err(BasisError::InvalidDistribution(format!(
                "uniform bounds must satisfy lo < hi, got ({lo}, {hi})"
            )));
        }
        Self::new(name, Distribution::Uniform, 0.5 * (lo + hi), 0.5 * (hi - lo))
    }

    pub fn physical(&self, xi: f64) -> f64 {
        self.shift + self.scale * xi
    }

    pub fn mean(&self) -> f64 {
        self.physical(self.dist.mean())
    }

    pub fn std_dev(&self) -> f64 {
        self.scale.abs() * self.dist.variance().sqrt()
    }
}
