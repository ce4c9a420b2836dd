//! Small dense helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::seed;

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Stacks real and imaginary parts: `[Re A; Im A]`.
pub fn lift_matrix(a: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    DMatrix::from_fn(2 * m, n, |i, j| {
        if i < m {
            a[(i, j)].re
        } else {
            a[(i - m, j)].im
        }
    })
}

pub fn lift_vector(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

/// Spectral norm by power iteration on `A^T A` from a seeded start.
pub fn spectral_norm(a: &DMatrix<f64>, iters: usize, seed: u64) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut rng = seed::rng(seed);
    let mut x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let mut est = 0.0;
    for _ in 0..iters {
        let nx = x.norm();
        if nx == 0.0 {
            return 0.0;
        }
        x /= nx;
        let ax = a * &x;
        est = ax.norm();
        x = a.tr_mul(&ax);
    }
    est
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -7.0, 1.0]));
        assert!((spectral_norm(&a, 100, 0) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn lifting() {
        let a = DMatrix::from_row_slice(1, 2, &[Complex64::new(1.0, 2.0), Complex64::new(3.0, -4.0)]);
        let l = lift_matrix(&a);
        assert_eq!(l.as_slice(), &[1.0, 2.0, 3.0, -4.0]);
        assert_eq!(lift_vector(&[Complex64::new(1.0, 2.0)]), vec![1.0, 2.0]);
    }
}
