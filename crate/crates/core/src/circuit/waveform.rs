//! Independent source waveforms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Waveform {
    Dc(f64),
    /// `vo + va·exp(-θ(t-td))·sin(2πf(t-td))` for `t ≥ td`.
    Sin {
        offset: f64,
        amplitude: f64,
        freq: f64,
        delay: f64,
        damping: f64,
    },
    Pulse {
        v1: f64,
        v2: f64,
        delay: f64,
        rise: f64,
        fall: f64,
        width: f64,
        period: f64,
    },
    /// Piecewise linear through `(t, v)` points, held constant outside.
    Pwl(Vec<(f64, f64)>),
}

impl Waveform {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Waveform::Dc(v) => *v,
            Waveform::Sin {
                offset,
                amplitude,
                freq,
                delay,
                damping,
            } => {
                if t < *delay {
                    *offset
                } else {
                    let tau = t - delay;
                    offset + amplitude * (-damping * tau).exp() * (2.0 * PI * freq * tau).sin()
                }
            }
            Waveform::Pulse {
                v1,
                v2,
                delay,
                rise,
                fall,
                width,
                period,
            } => {
                if t <= *delay {
                    return *v1;
                }
                let mut tau = t - delay;
                if *period > 0.0 {
                    tau %= period;
                }
                if tau < *rise {
                    v1 + (v2 - v1) * tau / rise
                } else if tau < rise + width {
                    *v2
                } else if tau < rise + width + fall {
                    v2 + (v1 - v2) * (tau - rise - width) / fall
                } else {
                    *v1
                }
            }
            Waveform::Pwl(points) => {
                let Some(first) = points.first() else {
                    return 0.0;
                };
                if t <= first.0 {
                    return first.1;
                }
                for w in points.windows(2) {
                    let (t0, v0) = w[0];
                    let (t1, v1) = w[1];
                    if t <= t1 {
                        return if t1 > t0 { v0 + (v1 - v0) * (t - t0) / (t1 - t0) } else { v1 };
                    }
                }
                points.last().map_or(0.0, |p| p.1)
            }
        }
    }

    /// Value used by DC analyses.
    pub fn dc_value(&self) -> f64 {
        self.value(0.0)
    }

    /// Slope discontinuities in `(t0, t1]`, ascending.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            Waveform::Dc(_) => {}
            Waveform::Sin { delay, .. } => {
                if *delay > t0 && *delay <= t1 {
                    out.push(*delay);
                }
            }
            Waveform::Pulse {
                delay,
                rise,
                fall,
                width,
                period,
                ..
            } => {
                let corners = [0.0, *rise, rise + width, rise + width + fall];
                let mut base = *delay;
                loop {
                    for c in corners {
                        let t = base + c;
                        if t > t0 && t <= t1 {
                            out.push(t);
                        }
                    }
                    if *period <= 0.0 || base > t1 {
                        break;
                    }
                    base += period;
                }
            }
            Waveform::Pwl(points) => {
                out.extend(points.iter().map(|p| p.0).filter(|&t| t > t0 && t <= t1));
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}
