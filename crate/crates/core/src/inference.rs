//! Decorrelated score and one-step Wald inference for a single coordinate.
//!
//! Write `beta = (alpha, gamma)` with `alpha = beta_j`. The decorrelated score
//! removes from `grad_alpha L` its projection on the nuisance directions,
//! `F_S = grad_alpha L - d^T grad_gamma L`, where `d` solves the
//! Dantzig-selector LP built from the Hessian blocks. The score test evaluates
//! it with the null value imposed on coordinate `j`; the Wald estimator takes
//! one Newton-type step from the unrestricted estimate.
//!
//! Coordinates are 0-based throughout the library.

use ndarray::{Array1, ArrayView1};

use crate::dantzig::{solve_dantzig, DantzigResult};
use crate::error::{Error, Result};
use crate::loss::{
    hessian_partition, linear_index, loss_hessian, value_and_gradient, vector_partition,
};
use crate::model::{Dataset, LinkFunction};
use crate::normal::{normal_quantile, two_sided_p_value};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceConfig<T> {
    /// Tested coordinate `j` (0-based).
    pub coordinate: usize,
    /// Dantzig-selector tuning parameter.
    pub rho: T,
    /// Test level `delta`; confidence intervals have level `1 - delta`.
    pub significance: T,
    /// Hypothesized value of `beta_j`.
    pub null_value: T,
}

impl<T: Scalar> InferenceConfig<T> {
    pub fn new(coordinate: usize, rho: T) -> Self {
        Self {
            coordinate,
            rho,
            significance: T::of(0.05),
            null_value: T::zero(),
        }
    }

    pub fn with_significance(mut self, delta: T) -> Self {
        self.significance = delta;
        self
    }

    pub fn with_null_value(mut self, c: T) -> Self {
        self.null_value = c;
        self
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.coordinate >= d {
            return Err(Error::Input(format!(
                "coordinate {} out of range for dimension {d}",
                self.coordinate
            )));
        }
        if !(self.significance > T::zero() && self.significance < T::one()) {
            return Err(Error::Config(format!(
                "significance must lie in (0, 1), got {}",
                self.significance
            )));
        }
        if !(self.rho > T::zero()) {
            return Err(Error::Config(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        Ok(())
    }

    /// `Phi^{-1}(1 - delta / 2)`.
    pub fn critical_value(&self) -> Result<f64> {
        normal_quantile(1.0 - self.significance.to_f64_lossy() / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTestResult<T> {
    /// `sqrt(n) * F_S / sigma_S` at the null-imposed point.
    pub statistic: T,
    pub f_s: T,
    pub sigma_s: T,
    pub p_value: f64,
    pub reject: bool,
    pub d_hat: DantzigResult<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaldResult<T> {
    /// One-step estimate of `beta_j`.
    pub alpha_bar: T,
    pub sigma_w: T,
    /// `sqrt(n) * (alpha_bar - null_value) / sigma_W`.
    pub statistic: T,
    pub ci_low: T,
    pub ci_high: T,
    pub p_value: f64,
    pub reject: bool,
    pub d_hat: DantzigResult<T>,
}

/// Decorrelated score `F_S(beta, rho)` for coordinate `j` and the Dantzig
/// solution it used.
pub fn decorrelated_score<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta: ArrayView1<'_, T>,
    j: usize,
    rho: T,
) -> Result<(T, DantzigResult<T>)> {
    let (_, grad) = value_and_gradient(link, data, beta)?;
    let hess = loss_hessian(link, data, beta)?;
    let part = hessian_partition(hess.view(), j)?;
    let dz = solve_dantzig(part.h_ag.view(), part.h_gg.view(), rho)?;
    if !dz.is_optimal() {
        return Err(Error::DantzigInfeasible {
            rho: rho.to_f64_lossy(),
        });
    }
    let (g_alpha, g_gamma) = vector_partition(grad.view(), j)?;
    let f_s = g_alpha - crate::loss::dot(dz.d_hat.view(), g_gamma.view());
    Ok((f_s, dz))
}

/// `w` with 1 at coordinate `j` and `-d_hat` on the remaining coordinates in order.
fn embed_direction<T: Scalar>(d_hat: ArrayView1<'_, T>, j: usize) -> Array1<T> {
    let d = d_hat.len() + 1;
    let mut w = Array1::zeros(d);
    let mut rest = d_hat.iter();
    for (k, wk) in w.iter_mut().enumerate() {
        *wk = if k == j {
            T::one()
        } else {
            -*rest.next().expect("d_hat has d - 1 entries")
        };
    }
    w
}

/// The two factors of the variance estimators:
/// `(1/n) sum f'(x_i^T beta)^2 (x_i^T w)^2` and `(1/n) sum [y_i - f(x_i^T beta)]^2`.
fn variance_factors<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta: ArrayView1<'_, T>,
    j: usize,
    d_hat: ArrayView1<'_, T>,
) -> Result<(T, T)> {
    if beta.len() != data.d() || d_hat.len() + 1 != data.d() || j >= data.d() {
        return Err(Error::Input(format!(
            "need beta of length {}, d_hat of length {} and coordinate below {}",
            data.d(),
            data.d().saturating_sub(1),
            data.d()
        )));
    }
    let w = embed_direction(d_hat, j);
    let index = linear_index(data.design().view(), beta);
    let proj = linear_index(data.design().view(), w.view());
    let n = T::from_usize_lossy(data.n());
    let mut info = T::zero();
    let mut mse = T::zero();
    for i in 0..data.n() {
        let fp = link.deriv(index[i]);
        info += fp * fp * proj[i] * proj[i];
        let r = data.response()[i] - link.eval(index[i]);
        mse += r * r;
    }
    Ok((info / n, mse / n))
}

fn positive_finite<T: Scalar>(v: T) -> Result<T> {
    if v > T::zero() && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::DegenerateVariance)
    }
}

/// `sigma_S^2 = {(1/n) sum f'(x_i^T beta)^2 (x_i^T w)^2} * {(1/n) sum [y_i - f(x_i^T beta)]^2}`.
pub fn score_variance<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta: ArrayView1<'_, T>,
    j: usize,
    d_hat: ArrayView1<'_, T>,
) -> Result<T> {
    let (info, mse) = variance_factors(link, data, beta, j, d_hat)?;
    positive_finite(info * mse)
}

/// `sigma_W^2 = {(1/n) sum f'(x_i^T beta)^2 (x_i^T w)^2}^{-1} * {(1/n) sum [y_i - f(x_i^T beta)]^2}`.
pub fn wald_variance<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta: ArrayView1<'_, T>,
    j: usize,
    d_hat: ArrayView1<'_, T>,
) -> Result<T> {
    let (info, mse) = variance_factors(link, data, beta, j, d_hat)?;
    positive_finite(info)?;
    positive_finite(mse / info)
}

fn sqrt_n<T: Scalar>(data: &Dataset<T>) -> T {
    T::from_usize_lossy(data.n()).sqrt()
}

/// Decorrelated score test of `H0: beta_j = null_value`, evaluated at
/// `beta_hat` with coordinate `j` replaced by the null value.
pub fn score_test<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta_hat: ArrayView1<'_, T>,
    config: &InferenceConfig<T>,
) -> Result<ScoreTestResult<T>> {
    config.validate(data.d())?;
    let j = config.coordinate;
    let mut beta_null = beta_hat.to_owned();
    beta_null[j] = config.null_value;

    let (f_s, d_hat) = decorrelated_score(link, data, beta_null.view(), j, config.rho)?;
    let var = score_variance(link, data, beta_null.view(), j, d_hat.d_hat.view())?;
    let sigma_s = var.sqrt();
    let statistic = sqrt_n(data) * f_s / sigma_s;
    let z = statistic.to_f64_lossy();
    let critical = config.critical_value()?;
    Ok(ScoreTestResult {
        statistic,
        f_s,
        sigma_s,
        p_value: two_sided_p_value(z),
        reject: z.abs() > critical,
        d_hat,
    })
}

/// One-step Wald estimator, its `1 - delta` confidence interval and the Wald
/// test of `H0: beta_j = null_value`, all at the unrestricted estimate.
pub fn wald_estimate<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta_hat: ArrayView1<'_, T>,
    config: &InferenceConfig<T>,
) -> Result<WaldResult<T>> {
    config.validate(data.d())?;
    let j = config.coordinate;

    let (_, grad) = value_and_gradient(link, data, beta_hat)?;
    let hess = loss_hessian(link, data, beta_hat)?;
    let part = hessian_partition(hess.view(), j)?;
    let d_hat = solve_dantzig(part.h_ag.view(), part.h_gg.view(), config.rho)?;
    if !d_hat.is_optimal() {
        return Err(Error::DantzigInfeasible {
            rho: config.rho.to_f64_lossy(),
        });
    }
    let (g_alpha, g_gamma) = vector_partition(grad.view(), j)?;
    let f_s = g_alpha - crate::loss::dot(d_hat.d_hat.view(), g_gamma.view());

    let denom = part.h_aa - crate::loss::dot(part.h_ag.view(), d_hat.d_hat.view());
    if !(denom.abs() > T::of(1e-12)) {
        return Err(Error::SingularDenominator(denom.to_f64_lossy()));
    }
    let alpha_bar = beta_hat[j] - f_s / denom;

    let sigma_w = wald_variance(link, data, beta_hat, j, d_hat.d_hat.view())?.sqrt();
    let critical = config.critical_value()?;
    let half_width = T::of(critical) * sigma_w / sqrt_n(data);
    let statistic = sqrt_n(data) * (alpha_bar - config.null_value) / sigma_w;
    let z = statistic.to_f64_lossy();
    Ok(WaldResult {
        alpha_bar,
        sigma_w,
        statistic,
        ci_low: alpha_bar - half_width,
        ci_high: alpha_bar + half_width,
        p_value: two_sided_p_value(z),
        reject: z.abs() > critical,
        d_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::loss_gradient;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, n: usize, d: usize, noise: f64) -> (Dataset<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let link = LinkFunction::<f64>::two_x_plus_cos();
        let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.7..1.7));
        let beta = Array1::from_shape_fn(d, |j| if j < 2 { 0.8 } else { 0.0 });
        let y = Array1::from_shape_fn(n, |i| {
            link.eval(x.row(i).dot(&beta)) + noise * rng.gen_range(-1.0..1.0)
        });
        (Dataset::new(x, y).unwrap(), beta)
    }

    #[test]
    fn large_rho_reduces_to_partial_score() {
        let link = LinkFunction::<f64>::two_x_plus_cos();
        let (data, beta) = instance(1, 30, 5, 0.3);
        let (f_s, dz) = decorrelated_score(&link, &data, beta.view(), 2, 1e6).unwrap();
        assert!(dz.d_hat.iter().all(|&v| v == 0.0));
        let g = loss_gradient(&link, &data, beta.view()).unwrap();
        assert_eq!(f_s, g[2]);
    }

    #[test]
    fn noiseless_truth_has_zero_score() {
        let link = LinkFunction::<f64>::two_x_plus_cos();
        let (data, beta) = instance(2, 25, 4, 0.0);
        let (f_s, _) = decorrelated_score(&link, &data, beta.view(), 3, 0.05).unwrap();
        assert_eq!(f_s, 0.0);
    }

    #[test]
    fn score_matches_recomputation() {
        let link = LinkFunction::<f64>::two_x_plus_cos();
        let (data, beta) = instance(3, 40, 6, 0.5);
        let j = 4;
        let (f_s, dz) = decorrelated_score(&link, &data, beta.view(), j, 0.02).unwrap();
        assert!(dz.d_hat.iter().any(|&v| v != 0.0));
        // gradient assembled observation by observation, partitioned by hand
        let n = data.n() as f64;
        let mut g = vec![0.0; 6];
        for i in 0..data.n() {
            let u: f64 = data.row(i).dot(&beta);
            let r = data.response()[i] - link.eval(u);
            for k in 0..6 {
                g[k] -= r * link.deriv(u) * data.design()[[i, k]] / n;
            }
        }
        let rest: Vec<f64> = (0..6).filter(|&k| k != j).map(|k| g[k]).collect();
        let oracle = g[j]
            - rest
                .iter()
                .zip(dz.d_hat.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>();
        assert!((f_s - oracle).abs() <= 1e-12);
    }

    #[test]
    fn identity_variance_without_decorrelation() {
        let link = LinkFunction::<f64>::identity();
        let (data, beta) = instance(4, 20, 3, 1.0);
        let j = 1;
        let v = score_variance(&link, &data, beta.view(), j, array![0.0, 0.0].view()).unwrap();
        let n = 20.0;
        let xx: f64 = data.design().column(j).iter().map(|x| x * x).sum::<f64>() / n;
        let mse: f64 = (0..20)
            .map(|i| (data.response()[i] - data.row(i).dot(&beta)).powi(2))
            .sum::<f64>()
            / n;
        assert!((v - xx * mse).abs() <= 1e-12);
    }

    #[test]
    fn variance_matches_recomputation() {
        let link = LinkFunction::<f64>::two_x_plus_cos();
        let (data, beta) = instance(5, 30, 4, 0.7);
        let d_hat = array![0.3, -0.2, 0.1];
        let j = 2;
        let w = [-0.3, 0.2, 1.0, -0.1];
        let mut a = 0.0;
        let mut b = 0.0;
        for i in (0..30).rev() {
            let u: f64 = data.row(i).dot(&beta);
            let xw: f64 = (0..4).map(|k| data.design()[[i, k]] * w[k]).sum();
            a += (2.0 - u.sin()).powi(2) * xw * xw;
            b += (data.response()[i] - link.eval(u)).powi(2);
        }
        let oracle = (a / 30.0) * (b / 30.0);
        let v = score_variance(&link, &data, beta.view(), j, d_hat.view()).unwrap();
        assert!((v - oracle).abs() <= 1e-12 * oracle.max(1.0));
        let vw = wald_variance(&link, &data, beta.view(), j, d_hat.view()).unwrap();
        assert!((vw - (b / 30.0) / (a / 30.0)).abs() <= 1e-12);
    }

    #[test]
    fn zero_residuals_are_degenerate() {
        let link = LinkFunction::<f64>::two_x_plus_cos();
        let (data, beta) = instance(6, 20, 3, 0.0);
        let r = score_variance(&link, &data, beta.view(), 0, array![0.0, 0.0].view());
        assert_eq!(r, Err(Error::DegenerateVariance));
        let r = score_test(
            &link,
            &data,
            beta.view(),
            &InferenceConfig::new(0, 0.1).with_null_value(0.8),
        );
        assert_eq!(r.unwrap_err(), Error::DegenerateVariance);
    }

    #[test]
    fn zero_statistic_has_unit_p_value() {
        // y symmetric about a single covariate column with beta = 0: the score is zero
        let link = LinkFunction::<f64>::identity();
        let x = array![[1.0], [-1.0], [2.0], [-2.0]];
        let y = array![1.0, 1.0, 3.0, 3.0];
        let data = Dataset::new(x, y).unwrap();
        let res = score_test(
            &link,
            &data,
            array![0.0].view(),
            &InferenceConfig::new(0, 0.1),
        )
        .unwrap();
        assert_eq!(res.statistic, 0.0);
        assert_eq!(res.p_value, 1.0);
        assert!(!res.reject);
    }

    #[test]
    fn identity_one_dimensional_wald_is_least_squares() {
        let link = LinkFunction::<f64>::identity();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((50, 1), |_| rng.gen_range(-2.0..2.0));
        let y = Array1::from_shape_fn(50, |i| 1.3 * x[[i, 0]] + rng.gen_range(-1.0..1.0));
        let data = Dataset::new(x.clone(), y.clone()).unwrap();
        let sxx: f64 = x.column(0).iter().map(|v| v * v).sum();
        let sxy: f64 = x.column(0).iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let ols = sxy / sxx;
        // from an arbitrary starting value the one-step estimate lands on OLS
        let res = wald_estimate(
            &link,
            &data,
            array![0.2].view(),
            &InferenceConfig::new(0, 0.1),
        )
        .unwrap();
        assert!((res.alpha_bar - ols).abs() < 1e-12);
        // at OLS the interval is the classical z-interval
        let res = wald_estimate(
            &link,
            &data,
            array![ols].view(),
            &InferenceConfig::new(0, 0.1),
        )
        .unwrap();
        let mse: f64 = (0..50)
            .map(|i| (y[i] - ols * x[[i, 0]]).powi(2))
            .sum::<f64>()
            / 50.0;
        let se = (mse / sxx).sqrt();
        assert!((res.ci_high - (ols + 1.959963984540054 * se)).abs() < 1e-10);
        assert!((res.ci_low - (ols - 1.959963984540054 * se)).abs() < 1e-10);
    }

    #[test]
    fn decisions_consistent_with_p_values_and_intervals() {
        let link = LinkFunction::<f64>::two_x_plus_cos();
        for seed in 0..20 {
            let (data, beta) = instance(100 + seed, 60, 5, 0.8);
            for j in 0..5 {
                for c in [-0.5, 0.0, 0.4, 0.8] {
                    let cfg = InferenceConfig::new(j, 0.05).with_null_value(c);
                    let s = score_test(&link, &data, beta.view(), &cfg).unwrap();
                    assert_eq!(s.reject, s.p_value < 0.05);
                    let w = wald_estimate(&link, &data, beta.view(), &cfg).unwrap();
                    assert_eq!(w.reject, w.p_value < 0.05);
                    assert_eq!(w.reject, c < w.ci_low || c > w.ci_high);
                    assert!(w.ci_low <= w.alpha_bar && w.alpha_bar <= w.ci_high);
                }
            }
        }
    }

    #[test]
    fn critical_value_boundary() {
        let cfg = InferenceConfig::<f64>::new(0, 0.1);
        let q = cfg.critical_value().unwrap();
        assert!((q - 1.959963984540054).abs() < 1e-12);
        assert!(!(1.9599f64.abs() > q));
        assert!(1.9600f64.abs() > q);
    }

    #[test]
    fn invalid_configs() {
        let link = LinkFunction::<f64>::identity();
        let (data, beta) = instance(7, 10, 3, 1.0);
        assert!(matches!(
            score_test(&link, &data, beta.view(), &InferenceConfig::new(3, 0.1)),
            Err(Error::Input(_))
        ));
        let cfg = InferenceConfig::new(0, 0.1).with_significance(1.0);
        assert!(matches!(
            wald_estimate(&link, &data, beta.view(), &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn singular_denominator() {
        // Column 0 is identically zero so its Hessian entry vanishes.
        let link = LinkFunction::<f64>::identity();
        let x = array![[0.0, 1.0], [0.0, -1.0], [0.0, 2.0]];
        let data = Dataset::new(x, array![1.0, 0.5, -1.0]).unwrap();
        let r = wald_estimate(
            &link,
            &data,
            array![0.0, 0.0].view(),
            &InferenceConfig::new(0, 0.1),
        );
        assert!(matches!(r, Err(Error::SingularDenominator(_))));
    }

    #[test]
    fn deterministic() {
        let link = LinkFunction::<f64>::two_x_plus_cos();
        let (data, beta) = instance(8, 40, 6, 0.5);
        let cfg = InferenceConfig::new(1, 0.03);
        assert_eq!(
            score_test(&link, &data, beta.view(), &cfg).unwrap(),
            score_test(&link, &data, beta.view(), &cfg).unwrap()
        );
        assert_eq!(
            wald_estimate(&link, &data, beta.view(), &cfg).unwrap(),
            wald_estimate(&link, &data, beta.view(), &cfg).unwrap()
        );
    }
}
