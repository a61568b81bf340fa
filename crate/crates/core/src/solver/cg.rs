//! Jacobi-preconditioned conjugate gradients.

use crate::fem::CsrMatrix;
use crate::solver::LinearSolveError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` in place, starting from the incoming `x`.
///
/// Stops when `‖b − A x‖ ≤ tol ‖b‖`.
pub fn solve(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgOutcome, LinearSolveError> {
    let n = a.n;
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome { iterations: 0, relative_residual: 0.0 });
    }
    let mut inv_diag = Vec::with_capacity(n);
    for (i, d) in a.diagonal().into_iter().enumerate() {
        if !(d > 0.0) {
            return Err(LinearSolveError::NotPositiveDefinite { index: i, pivot: d });
        }
        inv_diag.push(1.0 / d);
    }

    let mut r = a.mul_vec(x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut res = dot(&r, &r).sqrt();
    if res <= tol * b_norm {
        return Ok(CgOutcome { iterations: 0, relative_residual: res / b_norm });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(LinearSolveError::Indefinite { iteration: it, curvature: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt();
        if res <= tol * b_norm {
            return Ok(CgOutcome { iterations: it, relative_residual: res / b_norm });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinearSolveError::CgNotConverged { iterations: max_iter, relative_residual: res / b_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system() {
        let a = CsrMatrix::identity(4);
        let mut x = vec![0.0; 4];
        solve(&a, &[1.0, 0.0, 0.0, 0.0], &mut x, 1e-14, 10).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn two_by_two() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]);
        let mut x = vec![0.0; 2];
        solve(&a, &[1.0, 2.0], &mut x, 1e-14, 10).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn indefinite_detected() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        let mut x = vec![0.0; 2];
        let err = solve(&a, &[1.0, -1.0], &mut x, 1e-12, 10).unwrap_err();
        assert!(matches!(err, LinearSolveError::Indefinite { .. }));
    }
}
