use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ratio of extreme eigenvalues of a symmetric matrix.
pub fn symmetric_condition(a: &DMatrix<f64>) -> f64 {
    let eig = a.clone().symmetric_eigen();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v.abs());
        hi = hi.max(v.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        (hi / lo).max(1.0)
    }
}

/// Solves a symmetric positive-definite system; falls back to partial-pivot LU.
pub fn solve_spd(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        let x = ch.solve(rhs);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    match a.clone().lu().solve(rhs) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x),
        _ => Err(Error::IllConditioned {
            condition: symmetric_condition(a),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = solve_spd(&a, &b).unwrap();
        assert!(((&a * &x) - &b).norm() < 1e-12);
    }

    #[test]
    fn indefinite_uses_lu() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let b = DVector::from_vec(vec![3.0, 5.0]);
        let x = solve_spd(&a, &b).unwrap();
        assert_eq!(x.as_slice(), &[5.0, 3.0]);
    }

    #[test]
    fn singular_is_error() {
        let a = DMatrix::zeros(2, 2);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(solve_spd(&a, &b), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn condition_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 10.0, 100.0]));
        assert!((symmetric_condition(&a) - 100.0).abs() < 1e-9);
    }
}
