//! Dense symmetric positive definite factorization and solves.

use ndarray::{Array1, Array2, ArrayView1};

/// Cholesky factorization `A = L Lᵀ` of a symmetric positive definite
/// matrix. Only the lower triangle of `A` is read. Returns the lower factor,
/// or `Err(m)` with the 1-based order of the first leading principal minor
/// that is not positive.
pub(crate) fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>, usize> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(i + 1);
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solves `A x = b` given the Cholesky factor `L` of `A`.
pub(crate) fn solve_with_factor(l: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

pub(crate) fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn factors_a_known_spd_matrix() {
        let a = array![[4.0, 2.0], [2.0, 5.0]];
        let l = cholesky(&a).unwrap();
        assert_eq!(l, array![[2.0, 0.0], [1.0, 2.0]]);
    }

    #[test]
    fn reports_the_failing_leading_minor() {
        assert_eq!(cholesky(&array![[-1.0]]).unwrap_err(), 1);
        // det of the 2x2 leading minor is negative.
        assert_eq!(cholesky(&array![[1.0, 2.0], [2.0, 1.0]]).unwrap_err(), 2);
    }

    #[test]
    fn solves_against_the_factor() {
        let a = array![[4.0, 2.0], [2.0, 5.0]];
        let l = cholesky(&a).unwrap();
        let x = solve_with_factor(&l, array![8.0, 9.0].view());
        let b = a.dot(&x);
        assert!((b[0] - 8.0).abs() < 1e-12 && (b[1] - 9.0).abs() < 1e-12);
    }
}
