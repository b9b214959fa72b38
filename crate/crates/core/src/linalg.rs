//! Small dense helpers shared by the solvers.

use nalgebra::DMatrix;

/// Induced 1-norm (max absolute column sum).
pub fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Inverse through LU with partial pivoting, together with the exact
/// 1-norm condition number `‖A‖₁·‖A⁻¹‖₁`.
pub fn inverse_with_cond(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    let inv = m.clone().lu().try_inverse()?;
    if inv.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let cond = norm1(m) * norm1(&inv);
    Some((inv, cond))
}

/// `(A ⊗ I_n) · x` for a vector laid out as `A.ncols()` blocks of length `n`.
pub fn kron_identity_mul(a: &DMatrix<f64>, n: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), a.ncols() * n);
    let mut out = vec![0.0; a.nrows() * n];
    for r in 0..a.nrows() {
        let dst = &mut out[r * n..(r + 1) * n];
        for c in 0..a.ncols() {
            let coef = a[(r, c)];
            if coef == 0.0 {
                continue;
            }
            for (d, s) in dst.iter_mut().zip(&x[c * n..(c + 1) * n]) {
                *d += coef * s;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_matches_dense() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let got = kron_identity_mul(&a, 3, &x);
        let mut dense = DMatrix::<f64>::zeros(6, 6);
        for r in 0..2 {
            for c in 0..2 {
                for i in 0..3 {
                    dense[(r * 3 + i, c * 3 + i)] = a[(r, c)];
                }
            }
        }
        let want = dense * nalgebra::DVector::from_column_slice(&x);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_has_no_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(inverse_with_cond(&a).is_none());
        let (inv, cond) = inverse_with_cond(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(inv, DMatrix::identity(3, 3));
        assert_eq!(cond, 1.0);
    }
}
