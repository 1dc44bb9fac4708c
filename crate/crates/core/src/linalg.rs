//! Small dense factorizations used by the samplers and diagnostics.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
pub fn cholesky<T: Scalar>(a: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::Input(format!(
            "Cholesky needs a square matrix, got {n}x{m}"
        )));
    }
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > T::zero()) {
            return Err(Error::Numerical(format!(
                "matrix not positive definite at pivot {j}"
            )));
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(l)
}

const JACOBI_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Scalar>(a: ArrayView2<'_, T>) -> Result<Array1<T>> {
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::Input(format!(
            "eigenvalues need a square matrix, got {n}x{m}"
        )));
    }
    let mut w = a.to_owned();
    let two = T::of(2.0);
    for _ in 0..JACOBI_SWEEPS {
        let off: T = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .fold(T::zero(), |acc, (p, q)| acc + w[[p, q]] * w[[p, q]]);
        let scale: T = w.iter().fold(T::zero(), |acc, &x| acc + x * x);
        if off <= T::epsilon() * T::epsilon() * scale || off.is_zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[[p, q]];
                if apq.is_zero() {
                    continue;
                }
                let theta = (w[[q, q]] - w[[p, p]]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = w[[k, p]];
                    let akq = w[[k, q]];
                    w[[k, p]] = c * akp - s * akq;
                    w[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = w[[p, k]];
                    let aqk = w[[q, k]];
                    w[[p, k]] = c * apk - s * aqk;
                    w[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| w[[i, i]]).collect();
    if eig.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    eig.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(Array1::from(eig))
}

/// `Sigma_jk = rho^|j - k|`.
pub fn toeplitz_covariance<T: Scalar>(d: usize, rho: T) -> Array2<T> {
    Array2::from_shape_fn((d, d), |(j, k)| {
        let lag = j.abs_diff(k);
        if lag == 0 {
            T::one()
        } else {
            rho.powi(lag as i32)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_reconstructs() {
        let a = toeplitz_covariance(6, 0.95f64);
        let l = cholesky(a.view()).unwrap();
        let back = l.dot(&l.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        for i in 0..6 {
            for j in (i + 1)..6 {
                assert_eq!(l[[i, j]], 0.0);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(cholesky(a.view()), Err(Error::Numerical(_))));
    }

    #[test]
    fn jacobi_small() {
        let a = array![[2.0f64, 1.0], [1.0, 2.0]];
        let e = symmetric_eigenvalues(a.view()).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
        let d = array![[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]];
        assert_eq!(
            symmetric_eigenvalues(d.view()).unwrap(),
            array![1.0, 2.0, 3.0]
        );
    }

    #[test]
    fn toeplitz_entries() {
        let s = toeplitz_covariance(4, 0.95f64);
        assert!(s.diag().iter().all(|&v| v == 1.0));
        assert_eq!(s[[0, 1]], 0.95);
        assert!((s[[0, 3]] - 0.95f64.powi(3)).abs() < 1e-15);
    }
}
