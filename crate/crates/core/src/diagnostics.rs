//! Brute-force checks for small instances: sparse eigenvalues of a Gram
//! matrix, the sparse-eigenvalue design condition, and finite-difference
//! verification of the loss derivatives.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::loss::{loss_gradient, loss_hessian, loss_value};
use crate::model::{Dataset, LinkFunction};
use crate::scalar::Scalar;

/// Largest dimension for which supports are enumerated exhaustively.
pub const MAX_ENUMERATION_DIM: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseEigenReport<T> {
    pub k: usize,
    pub rho_minus: T,
    pub rho_plus: T,
    /// Outcome of [`check_assumption1`] when `(s*, k*)` were supplied.
    pub condition_holds: Option<bool>,
    /// Largest absolute entry of the matrix.
    pub design_bound: T,
}

fn check_square<T: Scalar>(m: ArrayView2<'_, T>) -> Result<usize> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::Input(format!("matrix must be square, got {r}x{c}")));
    }
    if r > MAX_ENUMERATION_DIM {
        return Err(Error::TooLarge {
            d: r,
            max: MAX_ENUMERATION_DIM,
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("matrix has non-finite entries".into()));
    }
    Ok(r)
}

/// Visits every size-`k` subset of `first..d` in lexicographic order,
/// prefixed by `prefix`.
fn for_each_support(
    d: usize,
    k: usize,
    prefix: &mut Vec<usize>,
    first: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if prefix.len() == k {
        visit(prefix);
        return;
    }
    let remaining = k - prefix.len();
    for i in first..=(d - remaining) {
        prefix.push(i);
        for_each_support(d, k, prefix, i + 1, visit);
        prefix.pop();
    }
}

/// `rho_-(k)` and `rho_+(k)`: the extreme values of `v^T M v` over unit
/// vectors with at most `k` nonzeros, found by taking the extreme eigenvalues
/// of every `k x k` principal submatrix. Refuses `d > 24`.
pub fn sparse_eigenvalues<T: Scalar>(m: ArrayView2<'_, T>, k: usize) -> Result<(T, T)> {
    let d = check_square(m)?;
    if k == 0 || k > d {
        return Err(Error::Input(format!(
            "sparsity level must lie in 1..={d}, got {k}"
        )));
    }
    let extremes: Vec<Result<(T, T)>> = (0..=(d - k))
        .into_par_iter()
        .map(|lead| {
            let mut lo = T::infinity();
            let mut hi = T::neg_infinity();
            let mut failure = None;
            let mut prefix = vec![lead];
            let mut sub = Array2::<T>::zeros((k, k));
            for_each_support(d, k, &mut prefix, lead + 1, &mut |support| {
                if failure.is_some() {
                    return;
                }
                for (a, &i) in support.iter().enumerate() {
                    for (b, &j) in support.iter().enumerate() {
                        sub[[a, b]] = m[[i, j]];
                    }
                }
                match symmetric_eigenvalues(sub.view()) {
                    Ok(eig) => {
                        lo = lo.min(eig[0]);
                        hi = hi.max(eig[k - 1]);
                    }
                    Err(e) => failure = Some(e),
                }
            });
            failure.map_or(Ok((lo, hi)), Err)
        })
        .collect();
    extremes
        .into_iter()
        .try_fold((T::infinity(), T::neg_infinity()), |(lo, hi), r| {
            let (l, h) = r?;
            Ok((lo.min(l), hi.max(h)))
        })
}

/// Checks `rho_+(k*) / rho_-(2k* + s*) <= 1 + 0.5 k*/s*` and `k* >= 2 s*`.
/// A vanishing `rho_-(2k* + s*)` (below `1e-12` times the largest entry)
/// fails the condition.
pub fn check_assumption1<T: Scalar>(
    m: ArrayView2<'_, T>,
    s_star: usize,
    k_star: usize,
) -> Result<bool> {
    let d = check_square(m)?;
    if s_star == 0 || k_star == 0 || 2 * k_star + s_star > d {
        return Err(Error::Input(format!(
            "need s* >= 1, k* >= 1 and 2k* + s* <= d = {d}, got s*={s_star}, k*={k_star}"
        )));
    }
    let (_, rho_plus) = sparse_eigenvalues(m, k_star)?;
    let (rho_minus, _) = sparse_eigenvalues(m, 2 * k_star + s_star)?;
    let scale = m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if !(rho_minus > T::of(1e-12) * scale) {
        return Ok(false);
    }
    let bound = T::one() + T::of(0.5) * T::from_usize_lossy(k_star) / T::from_usize_lossy(s_star);
    Ok(rho_plus / rho_minus <= bound && k_star >= 2 * s_star)
}

/// Sparse eigenvalues at level `k` plus, when `(s*, k*)` is given, the
/// design condition.
pub fn sparse_eigen_report<T: Scalar>(
    m: ArrayView2<'_, T>,
    k: usize,
    condition: Option<(usize, usize)>,
) -> Result<SparseEigenReport<T>> {
    let (rho_minus, rho_plus) = sparse_eigenvalues(m, k)?;
    let condition_holds = condition
        .map(|(s, kk)| check_assumption1(m, s, kk))
        .transpose()?;
    Ok(SparseEigenReport {
        k,
        rho_minus,
        rho_plus,
        condition_holds,
        design_bound: m.iter().fold(T::zero(), |acc, v| acc.max(v.abs())),
    })
}

/// `(1/n) X^T X`.
pub fn sample_gram<T: Scalar>(design: ArrayView2<'_, T>) -> Array2<T> {
    let n = T::from_usize_lossy(design.nrows());
    design.t().dot(&design) / n
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub trials: usize,
    /// Largest `||analytic - fd||_inf / max(||fd||_inf, 1)` over the gradient checks.
    pub max_rel_gradient: f64,
    /// The same for the Hessian.
    pub max_rel_hessian: f64,
    pub passed: bool,
}

impl GradientReport {
    pub const GRADIENT_TOL: f64 = 1e-6;
    pub const HESSIAN_TOL: f64 = 1e-5;

    /// The larger of the two deviations.
    pub fn max_rel_err(&self) -> f64 {
        self.max_rel_gradient.max(self.max_rel_hessian)
    }
}

const FD_STEP: f64 = 1e-5;

fn relative_inf<'a>(
    analytic: impl Iterator<Item = &'a f64>,
    numeric: impl Iterator<Item = &'a f64> + Clone,
) -> f64 {
    let scale = numeric.clone().fold(1.0f64, |acc, v| acc.max(v.abs()));
    analytic
        .zip(numeric)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
        / scale
}

fn random_instance<R: Rng + ?Sized>(
    link: &LinkFunction<f64>,
    n: usize,
    d: usize,
    rng: &mut R,
) -> Result<(Dataset<f64>, Array1<f64>)> {
    let x = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
    let truth = Array1::from_shape_fn(d, |_| 0.5 * rng.sample::<f64, _>(StandardNormal));
    let y = Array1::from_shape_fn(n, |i| {
        link.eval(x.row(i).dot(&truth)) + rng.sample::<f64, _>(StandardNormal)
    });
    let beta = Array1::from_shape_fn(d, |_| 0.5 * rng.sample::<f64, _>(StandardNormal));
    Ok((Dataset::new(x, y)?, beta))
}

/// Compares [`loss_gradient`] and [`loss_hessian`] against central
/// differences of the loss and gradient on `trials` random instances of size
/// `n x d`.
pub fn check_gradients<R: Rng + ?Sized>(
    link: &LinkFunction<f64>,
    n: usize,
    d: usize,
    trials: usize,
    rng: &mut R,
) -> Result<GradientReport> {
    check_gradients_with(link, n, d, trials, rng, loss_gradient, loss_hessian)
}

/// [`check_gradients`] with caller-supplied analytic derivatives.
pub fn check_gradients_with<R, G, H>(
    link: &LinkFunction<f64>,
    n: usize,
    d: usize,
    trials: usize,
    rng: &mut R,
    gradient: G,
    hessian: H,
) -> Result<GradientReport>
where
    R: Rng + ?Sized,
    G: Fn(&LinkFunction<f64>, &Dataset<f64>, ArrayView1<'_, f64>) -> Result<Array1<f64>>,
    H: Fn(&LinkFunction<f64>, &Dataset<f64>, ArrayView1<'_, f64>) -> Result<Array2<f64>>,
{
    if n == 0 || d == 0 || trials == 0 {
        return Err(Error::Input(format!(
            "need positive n, d and trials, got {n}, {d}, {trials}"
        )));
    }
    let mut max_g = 0.0f64;
    let mut max_h = 0.0f64;
    for _ in 0..trials {
        let (data, beta) = random_instance(link, n, d, rng)?;
        let g = gradient(link, &data, beta.view())?;
        let h = hessian(link, &data, beta.view())?;
        let mut fd_g = Array1::zeros(d);
        let mut fd_h = Array2::zeros((d, d));
        for j in 0..d {
            let mut plus = beta.clone();
            let mut minus = beta.clone();
            plus[j] += FD_STEP;
            minus[j] -= FD_STEP;
            fd_g[j] = (loss_value(link, &data, plus.view())?
                - loss_value(link, &data, minus.view())?)
                / (2.0 * FD_STEP);
            let diff = (loss_gradient(link, &data, plus.view())?
                - loss_gradient(link, &data, minus.view())?)
                / (2.0 * FD_STEP);
            fd_h.column_mut(j).assign(&diff);
        }
        max_g = max_g.max(relative_inf(g.iter(), fd_g.iter()));
        max_h = max_h.max(relative_inf(h.iter(), fd_h.iter()));
    }
    Ok(GradientReport {
        trials,
        max_rel_gradient: max_g,
        max_rel_hessian: max_h,
        passed: max_g <= GradientReport::GRADIENT_TOL && max_h <= GradientReport::HESSIAN_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::toeplitz_covariance;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_diagonal() {
        let eye = Array2::<f64>::eye(6);
        for k in 1..=6 {
            assert_eq!(sparse_eigenvalues(eye.view(), k).unwrap(), (1.0, 1.0));
        }
        let diag = array![[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]];
        assert_eq!(sparse_eigenvalues(diag.view(), 1).unwrap(), (1.0, 3.0));
    }

    #[test]
    fn refuses_large_and_bad_k() {
        let big = Array2::<f64>::eye(25);
        assert_eq!(
            sparse_eigenvalues(big.view(), 2),
            Err(Error::TooLarge { d: 25, max: 24 })
        );
        let eye = Array2::<f64>::eye(3);
        assert!(sparse_eigenvalues(eye.view(), 0).is_err());
        assert!(sparse_eigenvalues(eye.view(), 4).is_err());
    }

    #[test]
    fn assumption_on_identity_and_rank_one() {
        let eye = Array2::<f64>::eye(10);
        assert!(check_assumption1(eye.view(), 2, 4).unwrap());
        // k* < 2 s*
        assert!(!check_assumption1(eye.view(), 2, 3).unwrap());
        let u = Array1::from_shape_fn(10, |i| 1.0 + i as f64);
        let rank_one = Array2::from_shape_fn((10, 10), |(i, j)| u[i] * u[j]);
        assert!(!check_assumption1(rank_one.view(), 1, 2).unwrap());
        assert!(check_assumption1(eye.view(), 3, 4).is_err());
    }

    #[test]
    fn toeplitz_regression_value() {
        let sigma = toeplitz_covariance(16, 0.95f64);
        let report = sparse_eigen_report(sigma.view(), 4, Some((2, 4))).unwrap();
        // With correlation 0.95 the 10-sparse minimum eigenvalue is far below
        // the 4-sparse maximum, so the ratio bound 2 fails.
        assert_eq!(report.condition_holds, Some(false));
        assert_eq!(report.design_bound, 1.0);
        assert!(report.rho_minus < report.rho_plus);
    }

    #[test]
    fn gram_of_design() {
        let x = array![[1.0, 0.0], [0.0, 2.0]];
        assert_eq!(sample_gram(x.view()), array![[0.5, 0.0], [0.0, 2.0]]);
    }

    #[test]
    fn gradients_pass_for_builtin_links() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let report = check_gradients(&LinkFunction::identity(), 10, 4, 10, &mut rng).unwrap();
        assert!(report.passed && report.max_rel_err() < 1e-9, "{report:?}");
        let report = check_gradients(&LinkFunction::two_x_plus_cos(), 15, 6, 10, &mut rng).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn injected_fault_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let link = LinkFunction::two_x_plus_cos();
        let report = check_gradients_with(
            &link,
            12,
            5,
            5,
            &mut rng,
            |l, data, beta| loss_gradient(l, data, beta).map(|g| g * 1.001),
            loss_hessian,
        )
        .unwrap();
        assert!(!report.passed);
        assert!(report.max_rel_gradient > 1e-6);
        assert!(report.max_rel_hessian <= 1e-5);
    }
}
