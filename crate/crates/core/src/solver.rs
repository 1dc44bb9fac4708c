//! Proximal gradient solver for `min L(beta) + lambda ||beta||_1` with
//! Barzilai-Borwein initial stepsizes and a nonmonotone acceptance rule.
//!
//! Each outer iteration takes the spectral estimate `alpha_t` of the local
//! curvature, forms `u = beta - grad L(beta) / alpha_t`, soft-thresholds it at
//! `lambda / alpha_t`, and grows `alpha_t` by `eta` until the candidate clears
//! the maximum of the last `M + 1` objective values by `zeta * alpha_t / 2 *
//! ||step||^2`. The loss may be nonconvex, so the target is a stationary
//! point; [`kkt_residual`] measures how far a point is from one.

use ndarray::{Array1, ArrayView1, Zip};

use crate::error::{Error, Result};
use crate::loss::{l1_norm, loss_gradient, value_and_gradient};
use crate::model::{Dataset, FitConfig, LinkFunction};
use crate::scalar::Scalar;

/// Output of [`fit`]. `objective_trace[0]` is the objective at the starting
/// point and `objective_trace[t + 1]` the objective after accepted step `t`,
/// whose stepsize and squared length are `stepsize_trace[t]` and
/// `step_sq_trace[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub beta_hat: Array1<T>,
    pub iterations: usize,
    pub objective_trace: Vec<T>,
    pub stepsize_trace: Vec<T>,
    pub step_sq_trace: Vec<T>,
    pub kkt_residual: T,
    pub converged: bool,
}

impl<T: Scalar> FitResult<T> {
    /// Final objective value.
    pub fn objective(&self) -> T {
        *self
            .objective_trace
            .last()
            .expect("trace holds the starting objective")
    }

    /// Re-checks the acceptance inequality for every logged step.
    pub fn replay_acceptance(&self, zeta: T, memory: usize) -> bool {
        (0..self.iterations).all(|t| {
            acceptance_check(
                &self.objective_trace[..=t],
                self.objective_trace[t + 1],
                self.stepsize_trace[t],
                self.step_sq_trace[t],
                zeta,
                memory,
            )
        })
    }
}

/// `sign(u) * max(|u| - a, 0)`; exactly zero whenever `|u| <= a`.
#[inline]
pub fn soft_threshold<T: Scalar>(u: T, a: T) -> T {
    if u > a {
        u - a
    } else if u < -a {
        u + a
    } else {
        T::zero()
    }
}

/// Spectral stepsize `<delta, g> / <delta, delta>`, clamped into
/// `[alpha_min, alpha_max]`. Returns 1 at `t = 0`, and falls back to 1 when
/// the quotient is non-finite or nonpositive (stalled step, negative curvature).
pub fn bb_stepsize<T: Scalar>(
    t: usize,
    delta: ArrayView1<'_, T>,
    g: ArrayView1<'_, T>,
    alpha_min: T,
    alpha_max: T,
) -> T {
    if t == 0 {
        return T::one();
    }
    let dd = delta.iter().fold(T::zero(), |acc, &x| acc + x * x);
    let dg = delta
        .iter()
        .zip(g.iter())
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    let alpha = dg / dd;
    let alpha = if alpha.is_finite() && alpha > T::zero() {
        alpha
    } else {
        T::one()
    };
    alpha.max(alpha_min).min(alpha_max)
}

fn prox_from_gradient<T: Scalar>(
    beta: ArrayView1<'_, T>,
    grad: ArrayView1<'_, T>,
    alpha: T,
    lambda: T,
) -> Array1<T> {
    let threshold = lambda / alpha;
    let mut out = Array1::zeros(beta.len());
    Zip::from(&mut out)
        .and(beta)
        .and(grad)
        .for_each(|o, &b, &g| {
            *o = soft_threshold(b - g / alpha, threshold);
        });
    out
}

/// One proximal step: soft-threshold `beta - grad L(beta) / alpha` at `lambda / alpha`.
pub fn prox_step<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta: ArrayView1<'_, T>,
    alpha: T,
    lambda: T,
) -> Result<Array1<T>> {
    if !(alpha > T::zero()) {
        return Err(Error::Input(format!(
            "stepsize parameter must be positive, got {alpha}"
        )));
    }
    let grad = loss_gradient(link, data, beta)?;
    Ok(prox_from_gradient(beta, grad.view(), alpha, lambda))
}

/// Nonmonotone acceptance: `phi_new <= max(window) - zeta * alpha / 2 * step_sq`
/// where the window is the last `min(memory + 1, len)` entries of `history`.
pub fn acceptance_check<T: Scalar>(
    history: &[T],
    phi_new: T,
    alpha: T,
    step_sq: T,
    zeta: T,
    memory: usize,
) -> bool {
    assert!(!history.is_empty(), "objective history must be nonempty");
    let start = history.len().saturating_sub(memory + 1);
    let reference = history[start..]
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    phi_new <= reference - zeta * alpha / T::of(2.0) * step_sq
}

/// Largest violation of `grad L(beta) + lambda * xi = 0`, `xi` a subgradient of `||beta||_1`.
pub fn kkt_residual<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    beta: ArrayView1<'_, T>,
    lambda: T,
) -> Result<T> {
    let grad = loss_gradient(link, data, beta)?;
    Ok(kkt_from_gradient(beta, grad.view(), lambda))
}

fn kkt_from_gradient<T: Scalar>(beta: ArrayView1<'_, T>, grad: ArrayView1<'_, T>, lambda: T) -> T {
    beta.iter()
        .zip(grad.iter())
        .fold(T::zero(), |worst, (&b, &g)| {
            let v = if b.is_zero() {
                (g.abs() - lambda).max(T::zero())
            } else {
                (g + lambda * b.signum()).abs()
            };
            worst.max(v)
        })
}

fn norm_sq<T: Scalar>(v: ArrayView1<'_, T>) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

/// Runs the proximal gradient iteration until the relative change
/// `||beta_t - beta_{t-1}|| / ||beta_t||` drops to `tol` (absolute change when
/// `beta_t = 0`) or `max_iter` steps have been taken.
pub fn fit<T: Scalar>(
    link: &LinkFunction<T>,
    data: &Dataset<T>,
    config: &FitConfig<T>,
) -> Result<FitResult<T>> {
    let d = data.d();
    config.validate(d)?;
    let lambda = config.lambda;

    let mut beta = config.init.clone().unwrap_or_else(|| Array1::zeros(d));
    let (loss, mut grad) = value_and_gradient(link, data, beta.view())?;
    let mut objective_trace = vec![loss + lambda * l1_norm(beta.view())];
    let mut stepsize_trace = Vec::new();
    let mut step_sq_trace = Vec::new();

    let mut delta = Array1::<T>::zeros(d);
    let mut grad_diff = Array1::<T>::zeros(d);
    let mut converged = false;
    let mut t = 0;

    while t < config.max_iter {
        let mut alpha = bb_stepsize(
            t,
            delta.view(),
            grad_diff.view(),
            config.alpha_min,
            config.alpha_max,
        );
        let mut accepted = None;
        for _ in 0..config.max_linesearch {
            let candidate = prox_from_gradient(beta.view(), grad.view(), alpha, lambda);
            let step = &candidate - &beta;
            let step_sq = norm_sq(step.view());
            match value_and_gradient(link, data, candidate.view()) {
                Ok((loss, cand_grad)) => {
                    let phi = loss + lambda * l1_norm(candidate.view());
                    if phi.is_nan() {
                        return Err(Error::Numerical(format!("NaN objective at iteration {t}")));
                    }
                    if acceptance_check(
                        &objective_trace,
                        phi,
                        alpha,
                        step_sq,
                        config.zeta,
                        config.memory,
                    ) {
                        accepted = Some((candidate, step, step_sq, phi, cand_grad));
                        break;
                    }
                }
                // Overflow on a long trial step: shrink the step and retry.
                Err(Error::Numerical(_)) => {}
                Err(e) => return Err(e),
            }
            alpha *= config.eta;
        }

        let Some((candidate, step, step_sq, phi, cand_grad)) = accepted else {
            return Err(Error::LineSearchExhausted {
                iteration: t,
                linesearch_steps: config.max_linesearch,
                iterate: beta.iter().map(|v| v.to_f64_lossy()).collect(),
            });
        };

        grad_diff = &cand_grad - &grad;
        delta = step;
        beta = candidate;
        grad = cand_grad;
        objective_trace.push(phi);
        stepsize_trace.push(alpha);
        step_sq_trace.push(step_sq);
        t += 1;

        let change = step_sq.sqrt();
        let scale = norm_sq(beta.view()).sqrt();
        let small = if scale.is_zero() {
            change <= config.tol
        } else {
            change / scale <= config.tol
        };
        if small {
            converged = true;
            break;
        }
    }

    let kkt_residual = kkt_from_gradient(beta.view(), grad.view(), lambda);
    Ok(FitResult {
        beta_hat: beta,
        iterations: t,
        objective_trace,
        stepsize_trace,
        step_sq_trace,
        kkt_residual,
        converged,
    })
}
