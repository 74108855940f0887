use alloc::vec;
use alloc::vec::Vec;

use crate::math::{axpy, dot, sqrt};
use crate::{Error, Result};

/// Conjugate-gradient solve of `A x = b` for a symmetric positive-definite
/// operator given only as a matrix-vector product.
///
/// Stops once `||A x - b|| <= tol * ||b||` or after `iters` iterations.
pub fn conjugate_gradient<F>(mut apply: F, b: &[f64], iters: usize, tol: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let b_norm = sqrt(rr);
    if b_norm == 0.0 {
        return Ok(x);
    }
    for _ in 0..iters {
        if sqrt(rr) <= tol * b_norm {
            break;
        }
        let ap = apply(&p)?;
        Error::check_dim("operator output", n, ap.len())?;
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(Error::Numerical(alloc::format!(
                "conjugate gradient curvature p'Ap = {pap}"
            )));
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_next = dot(&r, &r);
        if !rr_next.is_finite() {
            return Err(Error::Numerical("non-finite conjugate gradient residual".into()));
        }
        let beta = rr_next / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DenseMatrix;
    use crate::seeded_rng;
    use rand::Rng as _;

    #[test]
    fn identity_one_iteration() {
        let b = [1.0, -2.0, 3.5];
        let x = conjugate_gradient(|v| Ok(v.to_vec()), &b, 1, 0.0).unwrap();
        assert_eq!(x, b.to_vec());
    }

    #[test]
    fn diagonal_system() {
        let d = [2.0, 4.0, 0.5, 8.0];
        let x = conjugate_gradient(
            |v| Ok(v.iter().zip(&d).map(|(a, b)| a * b).collect()),
            &[1.0; 4],
            10,
            1e-14,
        )
        .unwrap();
        for (xi, di) in x.iter().zip(&d) {
            assert!((xi - 1.0 / di).abs() < 1e-12);
        }
    }

    #[test]
    fn random_spd_matches_dense_solve() {
        let mut rng = seeded_rng(42);
        let n = 16;
        let m: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        // A = M^T M + I
        let mut a = DenseMatrix::identity(n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum::<f64>();
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let direct = a.solve(&b).unwrap();
        let x = conjugate_gradient(|v| a.matvec(v), &b, 200, 1e-14).unwrap();
        for (p, q) in x.iter().zip(&direct) {
            assert!((p - q).abs() < 1e-8, "{p} vs {q}");
        }
    }

    #[test]
    fn non_finite_operator_is_error() {
        let r = conjugate_gradient(|v| Ok(v.iter().map(|_| f64::NAN).collect()), &[1.0], 3, 0.0);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }
}
