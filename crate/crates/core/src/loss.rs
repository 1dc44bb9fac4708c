//! Least-squares loss `L(beta) = (1/2n) sum_i [y_i - f(x_i^T beta)]^2`, its
//! gradient and Hessian, and the l1-penalized objective.
//!
//! The loss carries the `1/(2n)` normalization throughout; the gradient and
//! Hessian below are its exact derivatives. Sums run over observations in
//! ascending order so results are bitwise reproducible.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::model::{Dataset, LinkFunction};
use crate::scalar::Scalar;

/// Loss value with optional derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEvaluation<T> {
    pub value: T,
    pub gradient: Option<Array1<T>>,
    pub hessian: Option<Array2<T>>,
}

/// Blocks of a symmetric matrix split at one coordinate `j`: the scalar
/// `H[j,j]`, row `j` without entry `j`, and `H` without row and column `j`.
/// Remaining coordinates keep ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianPartition<T> {
    pub h_aa: T,
    pub h_ag: Array1<T>,
    pub h_gg: Array2<T>,
}

fn check_dims<T: Scalar>(data: &Dataset<T>, beta: ArrayView1<'_, T>) -> Result<()> {
    if beta.len() != data.d() {
        return Err(Error::Input(format!(
            "parameter has length {}, dataset has {} covariates",
            beta.len(),
            data.d()
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `X beta`, one row at a time.
pub(crate) fn linear_index<T: Scalar>(
    design: ArrayView2<'_, T>,
    beta: ArrayView1<'_, T>,
) -> Array1<T> {
    Array1::from_iter(design.rows().into_iter().map(|row| dot(row, beta)))
}

fn finite_or<T: Scalar>(v: T, what: &str) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("non-finite {what}")))
    }
}

/// Residuals `y_i - f(x_i^T beta)` and the linear index.
fn residuals<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta: ArrayView1<'_, T>,
) -> (Array1<T>, Array1<T>) {
    let index = linear_index(data.design().view(), beta);
    let resid = Array1::from_iter(
        index
            .iter()
            .zip(data.response())
            .map(|(&u, &y)| y - link.eval(u)),
    );
    (index, resid)
}

fn half_mean_square<T: Scalar>(resid: &Array1<T>) -> T {
    let n = T::from_usize_lossy(resid.len());
    resid.iter().fold(T::zero(), |acc, &r| acc + r * r) / (n + n)
}

pub fn loss_value<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta: ArrayView1<'_, T>,
) -> Result<T> {
    check_dims(data, beta)?;
    let (_, resid) = residuals(link, data, beta);
    finite_or(half_mean_square(&resid), "loss value")
}

fn gradient_from<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    index: &Array1<T>,
    resid: &Array1<T>,
) -> Array1<T> {
    let n = T::from_usize_lossy(data.n());
    let mut grad = Array1::zeros(data.d());
    for (i, row) in data.design().rows().into_iter().enumerate() {
        let w = resid[i] * link.deriv(index[i]);
        grad.zip_mut_with(&row, |g, &x| *g -= w * x);
    }
    grad.mapv_inplace(|g| g / n);
    grad
}

/// `grad L(beta) = -(1/n) sum_i [y_i - f(x_i^T beta)] f'(x_i^T beta) x_i`.
pub fn loss_gradient<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta: ArrayView1<'_, T>,
) -> Result<Array1<T>> {
    check_dims(data, beta)?;
    let (index, resid) = residuals(link, data, beta);
    let grad = gradient_from(link, data, &index, &resid);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("non-finite gradient".into()));
    }
    Ok(grad)
}

/// Loss and gradient from a single pass over the data.
pub(crate) fn value_and_gradient<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta: ArrayView1<'_, T>,
) -> Result<(T, Array1<T>)> {
    check_dims(data, beta)?;
    let (index, resid) = residuals(link, data, beta);
    let value = finite_or(half_mean_square(&resid), "loss value")?;
    let grad = gradient_from(link, data, &index, &resid);
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("non-finite gradient".into()));
    }
    Ok((value, grad))
}

/// `hess L(beta) = (1/n) sum_i { f'(u_i)^2 - [y_i - f(u_i)] f''(u_i) } x_i x_i^T`
/// with `u_i = x_i^T beta`. Only the upper triangle is accumulated and then
/// mirrored, so the result is exactly symmetric.
pub fn loss_hessian<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta: ArrayView1<'_, T>,
) -> Result<Array2<T>> {
    check_dims(data, beta)?;
    let (index, resid) = residuals(link, data, beta);
    let weights = Array1::from_iter(index.iter().zip(resid.iter()).map(|(&u, &r)| {
        let d1 = link.deriv(u);
        d1 * d1 - r * link.deriv2(u)
    }));
    let h = weighted_gram(data.design().view(), weights.view());
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite Hessian".into()));
    }
    Ok(h)
}

/// `(1/n) sum_i w_i x_i x_i^T`, exactly symmetric.
pub(crate) fn weighted_gram<T: Scalar>(
    design: ArrayView2<'_, T>,
    weights: ArrayView1<'_, T>,
) -> Array2<T> {
    let (n, d) = design.dim();
    let mut h = Array2::<T>::zeros((d, d));
    for (row, &w) in design.rows().into_iter().zip(weights.iter()) {
        for a in 0..d {
            let wa = w * row[a];
            if wa.is_zero() {
                continue;
            }
            for b in a..d {
                h[[a, b]] += wa * row[b];
            }
        }
    }
    let nn = T::from_usize_lossy(n);
    for a in 0..d {
        for b in a..d {
            let v = h[[a, b]] / nn;
            h[[a, b]] = v;
            h[[b, a]] = v;
        }
    }
    h
}

/// Loss with gradient and/or Hessian on request.
pub fn evaluate<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta: ArrayView1<'_, T>,
    with_gradient: bool,
    with_hessian: bool,
) -> Result<LossEvaluation<T>> {
    let (value, gradient) = if with_gradient {
        let (v, g) = value_and_gradient(link, data, beta)?;
        (v, Some(g))
    } else {
        (loss_value(link, data, beta)?, None)
    };
    let hessian = if with_hessian {
        Some(loss_hessian(link, data, beta)?)
    } else {
        None
    };
    Ok(LossEvaluation {
        value,
        gradient,
        hessian,
    })
}

/// Splits a square matrix at coordinate `j` (0-based).
pub fn hessian_partition<T: Scalar>(h: ArrayView2<'_, T>, j: usize) -> Result<HessianPartition<T>> {
    let (rows, cols) = h.dim();
    if rows != cols {
        return Err(Error::Input(format!(
            "matrix must be square, got {rows}x{cols}"
        )));
    }
    if j >= rows {
        return Err(Error::Input(format!(
            "coordinate {j} out of range for dimension {rows}"
        )));
    }
    let rest: Vec<usize> = (0..rows).filter(|&k| k != j).collect();
    let h_ag = Array1::from_iter(rest.iter().map(|&k| h[[j, k]]));
    let h_gg = Array2::from_shape_fn((rows - 1, rows - 1), |(a, b)| h[[rest[a], rest[b]]]);
    Ok(HessianPartition {
        h_aa: h[[j, j]],
        h_ag,
        h_gg,
    })
}

/// Splits a vector at coordinate `j` into `(v[j], v without entry j)`.
pub fn vector_partition<T: Scalar>(v: ArrayView1<'_, T>, j: usize) -> Result<(T, Array1<T>)> {
    if j >= v.len() {
        return Err(Error::Input(format!(
            "coordinate {j} out of range for dimension {}",
            v.len()
        )));
    }
    let rest = Array1::from_iter(
        v.iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, &x)| x),
    );
    Ok((v[j], rest))
}

pub fn l1_norm<T: Scalar>(v: ArrayView1<'_, T>) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + x.abs())
}

/// `phi(beta) = L(beta) + lambda * ||beta||_1`.
pub fn penalized_objective<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta: ArrayView1<'_, T>,
    lambda: T,
) -> Result<T> {
    if !(lambda >= T::zero()) {
        return Err(Error::Input(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    Ok(loss_value(link, data, beta)? + lambda * l1_norm(beta))
}
