use crate::error::{Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// ‖A x − b‖ as tracked by the recurrence.
    pub residual_norm: f64,
}

/// Conjugate gradient for `A x = b` with symmetric positive definite `A`
/// given as a matrix-vector product. Stops once `‖r‖ ≤ tol·‖b‖` or after
/// `iters` iterations.
pub fn conjugate_gradient<F>(mut matvec: F, b: &[f64], iters: usize, tol: f64) -> Result<CgSolution>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rr = dot(&r, &r);
    let threshold = tol * rr.sqrt();
    let mut done = 0;
    for k in 0..iters {
        if rr.sqrt() <= threshold || rr == 0.0 {
            break;
        }
        let ap = matvec(&p)?;
        let alpha = rr / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        if !(alpha.is_finite() && rr_next.is_finite()) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverDiverged(k));
        }
        let beta = rr_next / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
        done = k + 1;
    }
    Ok(CgSolution {
        x,
        iterations: done,
        residual_norm: rr.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(a: &[Vec<f64>]) -> impl FnMut(&[f64]) -> Result<Vec<f64>> + '_ {
        move |v| Ok(a.iter().map(|row| dot(row, v)).collect())
    }

    #[test]
    fn identity_one_iteration() {
        let eye = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let b = [0.5, -2.0, 3.0];
        let sol = conjugate_gradient(dense(&eye), &b, 10, 1e-12).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.x, b.to_vec());
    }

    #[test]
    fn two_by_two() {
        let a = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
        let sol = conjugate_gradient(dense(&a), &[1.0, 2.0], 10, 1e-14).unwrap();
        assert!((sol.x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((sol.x[1] - 7.0 / 11.0).abs() < 1e-14);
        assert!(sol.iterations <= 2);
    }

    #[test]
    fn zero_rhs() {
        let a = vec![vec![2.0]];
        let sol = conjugate_gradient(dense(&a), &[0.0], 5, 1e-10).unwrap();
        assert_eq!(sol.x, vec![0.0]);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn flags_non_finite() {
        let r = conjugate_gradient(|v: &[f64]| Ok(vec![f64::NAN; v.len()]), &[1.0, 1.0], 5, 1e-10);
        assert!(matches!(r, Err(Error::SolverDiverged(0))));
    }
}
