//! Compact device equations with analytic derivatives.
//!
//! Model reference:
//!
//! * Diode: `i = Is·(exp(v/(N·Vt)) − 1) + Gmin·v`.
//! * MOSFET (Level 1, Shichman–Hodges): `β = kp·W/L`, `Vov = Vgs − VT`,
//!   triode `β(Vov·Vds − Vds²/2)(1 + λVds)`, saturation `β/2·Vov²(1 + λVds)`.
//!   Drain and source swap roles when `Vds < 0`; PMOS mirrors every voltage.
//!   `VT = vt + tcv·(T − 27 °C)`.
//! * BJT (Ebers–Moll transport form):
//!   `Ic = Is(e_f − e_r) − Is/βR·(e_r − 1)`, `Ib = Is/βF·(e_f − 1) + Is/βR·(e_r − 1)`.
//!
//! `Vt = k(T + 273.15)/q` with `T` in °C. Junction exponentials are continued
//! linearly above an argument of [`EXP_LIMIT`], which keeps them C¹ and
//! finite for any Newton iterate.

/// Boltzmann constant over the electron charge, V/K.
pub const K_OVER_Q: f64 = 8.617_333_262e-5;
pub const EXP_LIMIT: f64 = 40.0;
/// Conductance placed across every junction and channel.
pub const GMIN: f64 = 1e-12;
pub const TNOM_CELSIUS: f64 = 27.0;

pub fn thermal_voltage(celsius: f64) -> f64 {
    K_OVER_Q * (celsius + 273.15)
}

/// `exp(x)` and its derivative, linearly continued beyond [`EXP_LIMIT`].
pub fn exp_limited(x: f64) -> (f64, f64) {
    if x <= EXP_LIMIT {
        let e = x.exp();
        (e, e)
    } else {
        let e = EXP_LIMIT.exp();
        (e * (1.0 + x - EXP_LIMIT), e)
    }
}

/// Junction current and conductance.
pub fn diode(is: f64, n_vt: f64, v: f64) -> (f64, f64) {
    let (e, de) = exp_limited(v / n_vt);
    (is * (e - 1.0) + GMIN * v, is * de / n_vt + GMIN)
}

/// Forward-region Level-1 current for `vds ≥ 0`: `(id, gm, gds)`.
fn level1_forward(beta: f64, vt: f64, lambda: f64, vgs: f64, vds: f64) -> (f64, f64, f64) {
    let vov = vgs - vt;
    if vov <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let clm = 1.0 + lambda * vds;
    if vds < vov {
        let core = vov * vds - 0.5 * vds * vds;
        (
            beta * core * clm,
            beta * vds * clm,
            beta * (vov - vds) * clm + beta * core * lambda,
        )
    } else {
        let core = 0.5 * vov * vov;
        (beta * core * clm, beta * vov * clm, beta * core * lambda)
    }
}

/// Drain-to-source channel current of an n-type device for any `vds`:
/// `(ids, ∂ids/∂vgs, ∂ids/∂vds)`. Gmin is included.
pub fn level1(beta: f64, vt: f64, lambda: f64, vgs: f64, vds: f64) -> (f64, f64, f64) {
    let (i, gm, gds) = if vds >= 0.0 {
        level1_forward(beta, vt, lambda, vgs, vds)
    } else {
        let (i, gm, gds) = level1_forward(beta, vt, lambda, vgs - vds, -vds);
        (-i, -gm, gm + gds)
    };
    (i + GMIN * vds, gm, gds + GMIN)
}

/// Polarity-aware channel current; `sign` is +1 for NMOS and −1 for PMOS.
pub fn mosfet(sign: f64, beta: f64, vt: f64, lambda: f64, vgs: f64, vds: f64) -> (f64, f64, f64) {
    let (i, gm, gds) = level1(beta, sign * vt, lambda, sign * vgs, sign * vds);
    (sign * i, gm, gds)
}

/// Terminal currents into collector and base with their derivatives with
/// respect to `vbe` and `vbc`: `[ic, ib]`, `[[∂ic/∂vbe, ∂ic/∂vbc], [∂ib/∂vbe, ∂ib/∂vbc]]`.
pub struct BjtEval {
    pub ic: f64,
    pub ib: f64,
    pub jac: [[f64; 2]; 2],
}

pub fn ebers_moll(sign: f64, is: f64, bf: f64, br: f64, vt: f64, vbe: f64, vbc: f64) -> BjtEval {
    let (ef, def) = exp_limited(sign * vbe / vt);
    let (er, der) = exp_limited(sign * vbc / vt);
    let (def, der) = (def / vt, der / vt);
    let ic = is * (ef - er) - is / br * (er - 1.0) - GMIN * sign * vbc;
    let ib = is / bf * (ef - 1.0) + is / br * (er - 1.0) + GMIN * sign * (vbe + vbc);
    BjtEval {
        ic: sign * ic,
        ib: sign * ib,
        jac: [
            [is * def, -is * der - is / br * der - GMIN],
            [is / bf * def + GMIN, is / br * der + GMIN],
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
        let h = 1e-6 * x.abs().max(1e-3);
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn diode_at_zero() {
        let vt = thermal_voltage(27.0);
        let (i, g) = diode(1e-14, vt, 0.0);
        assert_eq!(i, 0.0);
        assert!((g - (1e-14 / vt + GMIN)).abs() < 1e-28);
    }

    #[test]
    fn saturation_closed_form() {
        // kp·W/L = 2e-4 and an overdrive of 1 V give 1e-4·(1 + λVds).
        let (lambda, vds) = (0.02, 2.0);
        let (i, _, _) = level1(2e-4, 0.5, lambda, 1.5, vds);
        let want = 1e-4 * (1.0 + lambda * vds) + GMIN * vds;
        assert!((i - want).abs() < 1e-18);
    }

    #[test]
    fn level1_derivatives_everywhere() {
        let (beta, vt, lambda) = (3e-4, 0.4, 0.05);
        for &vgs in &[-0.5, 0.3, 0.8, 1.7] {
            for &vds in &[-1.3, -0.2, 0.1, 0.9, 2.5] {
                for sign in [1.0, -1.0] {
                    let (vg, vd) = (sign * vgs, sign * vds);
                    let (_, gm, gds) = mosfet(sign, beta, sign * vt, lambda, vg, vd);
                    let gm_fd = fd(|v| mosfet(sign, beta, sign * vt, lambda, v, vd).0, vg);
                    let gds_fd = fd(|v| mosfet(sign, beta, sign * vt, lambda, vg, v).0, vd);
                    assert!((gm - gm_fd).abs() < 1e-9, "gm {vgs} {vds} {sign}");
                    assert!((gds - gds_fd).abs() < 1e-9, "gds {vgs} {vds} {sign}");
                }
            }
        }
    }

    #[test]
    fn channel_is_antisymmetric() {
        // Swapping drain and source reverses the current.
        let (a, _, _) = level1(1e-4, 0.3, 0.0, 1.2, 0.4);
        let (b, _, _) = level1(1e-4, 0.3, 0.0, 1.2 - 0.4, -0.4);
        assert!((a + b).abs() < 1e-18);
    }

    #[test]
    fn ebers_moll_derivatives() {
        let vt = thermal_voltage(30.0);
        for sign in [1.0, -1.0] {
            for &(vbe, vbc) in &[(0.65, -2.0), (0.7, 0.6), (-0.3, -0.1), (0.2, 0.75)] {
                let (vbe, vbc) = (sign * vbe, sign * vbc);
                let e = ebers_moll(sign, 1e-15, 120.0, 2.0, vt, vbe, vbc);
                let ic = |a: f64, b: f64| ebers_moll(sign, 1e-15, 120.0, 2.0, vt, a, b).ic;
                let ib = |a: f64, b: f64| ebers_moll(sign, 1e-15, 120.0, 2.0, vt, a, b).ib;
                let want = [
                    [fd(|v| ic(v, vbc), vbe), fd(|v| ic(vbe, v), vbc)],
                    [fd(|v| ib(v, vbc), vbe), fd(|v| ib(vbe, v), vbc)],
                ];
                for r in 0..2 {
                    for c in 0..2 {
                        // The floor covers difference cancellation next to mA-scale currents.
                        assert!(
                            (e.jac[r][c] - want[r][c]).abs() < 1e-5 * want[r][c].abs() + 1e-10,
                            "{sign} {vbe} {vbc} {r}{c}: {} vs {}",
                            e.jac[r][c],
                            want[r][c]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn limited_exponential_is_c1() {
        let (a, da) = exp_limited(EXP_LIMIT);
        let (b, db) = exp_limited(EXP_LIMIT + 1e-9);
        assert!((a - b).abs() / a < 1e-8 && da == db);
        assert!(exp_limited(1e6).0.is_finite());
    }
}
