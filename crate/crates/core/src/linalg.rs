//! Dense complex solves for the small linear systems of the frequency-domain
//! models (at most 4x4).

use num_complex::Complex;
use num_traits::Zero;

use crate::ddouble::Real;

/// Result of a multi right-hand-side solve.
#[derive(Debug, Clone)]
pub struct Solution<T> {
    /// `x[i][k]`: unknown `i` for right-hand side `k`.
    pub x: Vec<Vec<Complex<T>>>,
    /// Modulus of the determinant of the system matrix.
    pub det_abs: f64,
}

fn modulus<T: Real>(z: Complex<T>) -> f64 {
    z.re.to_f64().hypot(z.im.to_f64())
}

/// Solves `a * x = b` by Gaussian elimination with partial pivoting.
///
/// `a` is `n x n`, `b` is `n x m`. Returns `None` if a pivot is exactly zero.
pub fn solve<T: Real>(mut a: Vec<Vec<Complex<T>>>, mut b: Vec<Vec<Complex<T>>>) -> Option<Solution<T>> {
    let n = a.len();
    debug_assert!(a.iter().all(|row| row.len() == n));
    debug_assert_eq!(b.len(), n);
    let m = b.first().map_or(0, Vec::len);

    // log-accumulated so tiny determinants do not underflow before we see them
    let mut log_det = 0.0f64;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| modulus(a[i][col]).total_cmp(&modulus(a[j][col])))
            .unwrap();
        let p = modulus(a[pivot][col]);
        if p == 0.0 {
            return None;
        }
        log_det += p.ln();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor.is_zero() {
                continue;
            }
            let (upper, lower) = a.split_at_mut(row);
            for (t, &v) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *t = *t - factor * v;
            }
            let (upper, lower) = b.split_at_mut(row);
            for (t, &v) in lower[0].iter_mut().zip(&upper[col][..m]) {
                *t = *t - factor * v;
            }
        }
    }

    let mut x = vec![vec![Complex::new(T::zero(), T::zero()); m]; n];
    for k in 0..m {
        for row in (0..n).rev() {
            let mut acc = b[row][k];
            for j in row + 1..n {
                acc = acc - a[row][j] * x[j][k];
            }
            x[row][k] = acc / a[row][row];
        }
    }
    Some(Solution {
        x,
        det_abs: log_det.exp(),
    })
}
