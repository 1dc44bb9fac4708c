//! Synthetic data from `y = f(x^T beta*) + sigma z` with Toeplitz-correlated
//! Gaussian designs, and the three Monte Carlo experiments built on it:
//! the estimation-error sweep, the comparison against a Lasso fit on
//! inverted responses, and the type-I error / power table.
//!
//! # Random streams
//!
//! Every random draw comes from a ChaCha20 generator keyed by the 64-bit
//! `seed`, with the 64-bit stream id `(trial << 8) | tag` where `tag`
//! identifies the purpose (design, parameter, noise). Trials are therefore
//! independent of one another and of the order and thread on which they run,
//! and experiment output is a pure function of the configuration.
//!
//! Trials run on the current rayon pool; results are gathered in trial order
//! before aggregation.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{score_test, wald_estimate, InferenceConfig};
use crate::linalg::{cholesky, toeplitz_covariance};
use crate::model::{builtin_link, Dataset, FitConfig, LinkFunction, SparsityGroundTruth};
use crate::solver::fit;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaMode {
    /// Nonzero entries drawn independently from `U(lo, hi)`.
    Uniform { lo: f64, hi: f64 },
    /// Nonzero entries all equal to the given value.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub d: usize,
    pub s_star: usize,
    pub link_name: String,
    /// Noise standard deviation `sigma`.
    pub noise_sd: f64,
    /// Design correlation `r` in `Sigma_jk = r^|j-k|`.
    pub toeplitz_rho: f64,
    pub beta_mode: BetaMode,
    pub seed: u64,
    pub trials: usize,
}

impl SimConfig {
    /// Paper link, unit noise, `Sigma_jk = 0.95^|j-k|`, `beta*_j ~ U(0, 2)` on
    /// the support, 100 trials, seed 0.
    pub fn new(n: usize, d: usize, s_star: usize) -> Self {
        Self {
            n,
            d,
            s_star,
            link_name: "paper".into(),
            noise_sd: 1.0,
            toeplitz_rho: 0.95,
            beta_mode: BetaMode::Uniform { lo: 0.0, hi: 2.0 },
            seed: 0,
            trials: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 || self.d == 0 {
            return bad(format!(
                "n and d must be positive, got n={}, d={}",
                self.n, self.d
            ));
        }
        if self.s_star == 0 || self.s_star > self.d {
            return bad(format!(
                "s_star must lie in 1..={}, got {}",
                self.d, self.s_star
            ));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return bad(format!(
                "noise_sd must be finite and nonnegative, got {}",
                self.noise_sd
            ));
        }
        if !(0.0..1.0).contains(&self.toeplitz_rho) {
            return bad(format!(
                "toeplitz_rho must lie in [0, 1), got {}",
                self.toeplitz_rho
            ));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if let BetaMode::Uniform { lo, hi } = self.beta_mode {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return bad(format!(
                    "uniform bounds must satisfy lo < hi, got ({lo}, {hi})"
                ));
            }
        }
        builtin_link::<f64>(&self.link_name)?;
        Ok(())
    }

    pub fn link(&self) -> Result<LinkFunction<f64>> {
        builtin_link(&self.link_name)
    }

    /// `sqrt(log d / n)`, the common factor of the tuning-parameter rules.
    pub fn rate(&self) -> f64 {
        ((self.d as f64).ln() / self.n as f64).sqrt()
    }

    /// `sqrt(s* log d / n)`.
    pub fn effective_sample(&self) -> f64 {
        (self.s_star as f64).sqrt() * self.rate()
    }

    /// `c * sigma * sqrt(log d / n)`.
    pub fn tuning_rule(&self, c: f64) -> f64 {
        c * self.noise_sd * self.rate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
enum Stream {
    Design = 1,
    Beta = 2,
    Noise = 3,
}

fn stream_rng(seed: u64, trial: u64, purpose: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((trial << 8) | purpose as u64);
    rng
}

/// Rows `z L^T` for standard normal `z`, where `L` is a precomputed lower
/// Cholesky factor of the design covariance.
fn sample_with_factor<R: Rng + ?Sized>(
    n: usize,
    factor: ArrayView2<'_, f64>,
    rng: &mut R,
) -> Array2<f64> {
    let d = factor.nrows();
    let mut x = Array2::<f64>::zeros((n, d));
    let mut z = vec![0.0; d];
    for mut row in x.rows_mut() {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for (j, out) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in 0..=j {
                s += factor[[j, k]] * z[k];
            }
            *out = s;
        }
    }
    x
}

/// `n` i.i.d. rows from `N(0, Sigma)` with `Sigma_jk = toeplitz_rho^|j-k|`.
pub fn sample_design<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    toeplitz_rho: f64,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if !(0.0..1.0).contains(&toeplitz_rho) {
        return Err(Error::Config(format!(
            "toeplitz_rho must lie in [0, 1), got {toeplitz_rho}"
        )));
    }
    let factor = cholesky(toeplitz_covariance(d, toeplitz_rho).view())?;
    Ok(sample_with_factor(n, factor.view(), rng))
}

/// First `s_star` entries from `beta_mode`, the rest exactly zero.
pub fn make_beta_star<R: Rng + ?Sized>(
    d: usize,
    s_star: usize,
    beta_mode: BetaMode,
    rng: &mut R,
) -> Result<SparsityGroundTruth<f64>> {
    if s_star > d {
        return Err(Error::Config(format!("s_star = {s_star} exceeds d = {d}")));
    }
    let mut beta = Array1::zeros(d);
    for b in beta.iter_mut().take(s_star) {
        *b = match beta_mode {
            BetaMode::Uniform { lo, hi } => rng.gen_range(lo..hi),
            BetaMode::Constant(mu) => mu,
        };
    }
    Ok(SparsityGroundTruth {
        beta_star: beta,
        support_size: s_star,
    })
}

/// Generates trial `trial` of `config`, reusing a Cholesky factor across trials.
struct Generator {
    config: SimConfig,
    link: LinkFunction<f64>,
    factor: Array2<f64>,
}

impl Generator {
    fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let factor = cholesky(toeplitz_covariance(config.d, config.toeplitz_rho).view())?;
        Ok(Self {
            config: config.clone(),
            link: config.link()?,
            factor,
        })
    }

    fn trial(&self, trial: u64) -> Result<(Dataset<f64>, SparsityGroundTruth<f64>)> {
        let c = &self.config;
        let x = sample_with_factor(
            c.n,
            self.factor.view(),
            &mut stream_rng(c.seed, trial, Stream::Design),
        );
        let truth = make_beta_star(
            c.d,
            c.s_star,
            c.beta_mode,
            &mut stream_rng(c.seed, trial, Stream::Beta),
        )?;
        let mut noise = stream_rng(c.seed, trial, Stream::Noise);
        let y = Array1::from_iter(x.rows().into_iter().map(|row| {
            let z: f64 = noise.sample(StandardNormal);
            self.link.eval(row.dot(&truth.beta_star)) + c.noise_sd * z
        }));
        Ok((Dataset::new(x, y)?, truth))
    }
}

/// One synthetic dataset and the parameter it was drawn from.
pub fn generate(
    config: &SimConfig,
    trial: u64,
) -> Result<(Dataset<f64>, SparsityGroundTruth<f64>)> {
    Generator::new(config)?.trial(trial)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub l2_error: f64,
    pub l1_error: f64,
    pub effective_sample: f64,
    pub reject_null_true: Option<bool>,
    pub reject_null_false: Option<bool>,
    pub runtime_ms: f64,
}

fn errors(beta_hat: &Array1<f64>, beta_star: &Array1<f64>) -> (f64, f64) {
    let diff = beta_hat - beta_star;
    (diff.dot(&diff).sqrt(), diff.iter().map(|v| v.abs()).sum())
}

/// Mean and sample standard deviation (`n - 1` denominator, 0 for fewer than two values).
fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

/// Estimation settings shared by the sweep and the baseline comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationSettings {
    /// `lambda = c * sigma * sqrt(log d / n)`.
    pub lambda_rule: f64,
    /// Solver settings; the `lambda` field is replaced per configuration.
    pub fit: FitConfig<f64>,
}

impl Default for EstimationSettings {
    fn default() -> Self {
        Self {
            lambda_rule: 3.0,
            fit: FitConfig::new(0.0),
        }
    }
}

impl EstimationSettings {
    fn fit_config(&self, config: &SimConfig) -> FitConfig<f64> {
        let mut fc = self.fit.clone();
        fc.lambda = config.tuning_rule(self.lambda_rule);
        fc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub d: usize,
    pub s_star: usize,
    pub n: usize,
    pub effective_sample: f64,
    pub mean_l2: f64,
    pub sd_l2: f64,
    pub mean_l1: f64,
    pub sd_l1: f64,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub row: SweepRow,
    /// Successful trials only.
    pub records: Vec<TrialRecord>,
}

fn estimation_trial(
    generator: &Generator,
    fit_config: &FitConfig<f64>,
    trial: usize,
) -> Result<TrialRecord> {
    let start = std::time::Instant::now();
    let (data, truth) = generator.trial(trial as u64)?;
    let result = fit(&generator.link, &data, fit_config)?;
    let (l2, l1) = errors(&result.beta_hat, &truth.beta_star);
    Ok(TrialRecord {
        trial_index: trial,
        l2_error: l2,
        l1_error: l1,
        effective_sample: generator.config.effective_sample(),
        reject_null_true: None,
        reject_null_false: None,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// For each configuration, fits `trials` synthetic datasets with
/// `lambda = c * sigma * sqrt(log d / n)` and summarizes the l2 and l1 errors.
/// Failed fits are counted, not fatal.
pub fn run_estimation_sweep(
    grid: &[SimConfig],
    settings: &EstimationSettings,
) -> Result<Vec<SweepPoint>> {
    grid.iter()
        .map(|config| {
            let generator = Generator::new(config)?;
            let fc = settings.fit_config(config);
            fc.validate(config.d)?;
            let outcomes: Vec<Result<TrialRecord>> = (0..config.trials)
                .into_par_iter()
                .map(|t| estimation_trial(&generator, &fc, t))
                .collect();
            let records: Vec<TrialRecord> = outcomes
                .iter()
                .filter_map(|o| o.as_ref().ok().cloned())
                .collect();
            let l2: Vec<f64> = records.iter().map(|r| r.l2_error).collect();
            let l1: Vec<f64> = records.iter().map(|r| r.l1_error).collect();
            let (mean_l2, sd_l2) = mean_sd(&l2);
            let (mean_l1, sd_l1) = mean_sd(&l1);
            Ok(SweepPoint {
                row: SweepRow {
                    d: config.d,
                    s_star: config.s_star,
                    n: config.n,
                    effective_sample: config.effective_sample(),
                    mean_l2,
                    sd_l2,
                    mean_l1,
                    sd_l1,
                    trials: config.trials,
                    failures: config.trials - records.len(),
                },
                records,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out =
        String::from("d,s_star,n,effective_sample,mean_l2,sd_l2,mean_l1,sd_l1,trials,failures\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.d,
            r.s_star,
            r.n,
            fmt_g6(r.effective_sample),
            fmt_g6(r.mean_l2),
            fmt_g6(r.sd_l2),
            fmt_g6(r.mean_l1),
            fmt_g6(r.sd_l1),
            r.trials,
            r.failures
        );
    }
    out
}

/// Cross-validation settings for the inverted-response Lasso.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub folds: usize,
    pub grid_size: usize,
    /// Grid spans `[lo, hi] * sqrt(log d / n) * sd(z)` log-uniformly.
    pub lo: f64,
    pub hi: f64,
}

impl Default for CrossValidation {
    fn default() -> Self {
        Self {
            folds: 5,
            grid_size: 30,
            lo: 1e-4,
            hi: 1.0,
        }
    }
}

impl CrossValidation {
    fn grid(&self, scale: f64) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let m = self.grid_size;
        (0..m)
            .map(|k| {
                let t = if m == 1 {
                    1.0
                } else {
                    k as f64 / (m - 1) as f64
                };
                scale * (b + t * (a - b)).exp()
            })
            .collect()
    }
}

fn sample_sd(v: &Array1<f64>) -> f64 {
    mean_sd(v.as_slice().expect("contiguous response")).1
}

/// Identity-link Lasso on `data` with `lambda` chosen by K-fold
/// cross-validation (observation `i` in fold `i mod K`). Each fold walks the
/// grid from the largest value down with warm starts. Returns the refit on all
/// observations and the chosen `lambda`.
pub fn cross_validated_lasso(
    data: &Dataset<f64>,
    cv: &CrossValidation,
    base: &FitConfig<f64>,
) -> Result<(Array1<f64>, f64)> {
    if cv.folds < 2 || cv.folds > data.n() || cv.grid_size == 0 || !(0.0 < cv.lo && cv.lo < cv.hi) {
        return Err(Error::Config(format!(
            "invalid cross-validation settings {cv:?}"
        )));
    }
    let identity = LinkFunction::identity();
    let scale = ((data.d() as f64).ln() / data.n() as f64).sqrt()
        * sample_sd(data.response()).max(f64::MIN_POSITIVE);
    let grid = cv.grid(scale);
    let mut cv_error = vec![0.0; grid.len()];
    for fold in 0..cv.folds {
        let (train, test): (Vec<usize>, Vec<usize>) =
            (0..data.n()).partition(|i| i % cv.folds != fold);
        let train = data.select_rows(&train)?;
        let test = data.select_rows(&test)?;
        let mut warm: Option<Array1<f64>> = None;
        for (k, &lambda) in grid.iter().enumerate() {
            let mut fc = base.clone();
            fc.lambda = lambda;
            fc.init = warm.take();
            let beta = fit(&identity, &train, &fc)?.beta_hat;
            let pred = test.design().dot(&beta);
            let sse: f64 = pred
                .iter()
                .zip(test.response())
                .map(|(p, z)| (z - p) * (z - p))
                .sum();
            cv_error[k] += sse;
            warm = Some(beta);
        }
    }
    // Ties resolve to the larger lambda, which comes first in the grid.
    let best = (0..grid.len()).fold(0, |b, k| if cv_error[k] < cv_error[b] { k } else { b });
    let mut fc = base.clone();
    fc.lambda = grid[best];
    Ok((fit(&identity, data, &fc)?.beta_hat, grid[best]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedRecord {
    pub n: usize,
    pub trial_index: usize,
    pub proposed_l2: f64,
    pub proposed_l1: f64,
    pub baseline_l2: f64,
    pub baseline_l1: f64,
    pub baseline_lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub d: usize,
    pub s_star: usize,
    pub n: usize,
    pub effective_sample: f64,
    pub proposed_mean_l2: f64,
    pub baseline_mean_l2: f64,
    pub proposed_mean_l1: f64,
    pub baseline_mean_l1: f64,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineComparison {
    pub rows: Vec<BaselineRow>,
    /// Successful trials only, grouped by configuration in grid order.
    pub records: Vec<PairedRecord>,
}

fn baseline_trial(
    generator: &Generator,
    fit_config: &FitConfig<f64>,
    cv: &CrossValidation,
    trial: usize,
) -> Result<PairedRecord> {
    let (data, truth) = generator.trial(trial as u64)?;
    let proposed = fit(&generator.link, &data, fit_config)?.beta_hat;
    let inverted = data
        .response()
        .iter()
        .map(|&y| generator.link.invert(y))
        .collect::<Result<Array1<f64>>>()?;
    let mut base = fit_config.clone();
    base.init = None;
    let (baseline, lambda) = cross_validated_lasso(&data.with_response(inverted)?, cv, &base)?;
    let (p2, p1) = errors(&proposed, &truth.beta_star);
    let (b2, b1) = errors(&baseline, &truth.beta_star);
    Ok(PairedRecord {
        n: generator.config.n,
        trial_index: trial,
        proposed_l2: p2,
        proposed_l1: p1,
        baseline_l2: b2,
        baseline_l1: b1,
        baseline_lambda: lambda,
    })
}

/// Pairs the proposed estimator with a Lasso fit to `(X, f^{-1}(y))` on the
/// same datasets. A trial fails if either fit fails.
pub fn run_baseline_comparison(
    grid: &[SimConfig],
    settings: &EstimationSettings,
    cv: &CrossValidation,
) -> Result<BaselineComparison> {
    let mut rows = Vec::with_capacity(grid.len());
    let mut records = Vec::new();
    for config in grid {
        let generator = Generator::new(config)?;
        let fc = settings.fit_config(config);
        fc.validate(config.d)?;
        let outcomes: Vec<Result<PairedRecord>> = (0..config.trials)
            .into_par_iter()
            .map(|t| baseline_trial(&generator, &fc, cv, t))
            .collect();
        let ok: Vec<PairedRecord> = outcomes.into_iter().filter_map(|o| o.ok()).collect();
        let mean = |f: fn(&PairedRecord) -> f64| mean_sd(&ok.iter().map(f).collect::<Vec<_>>()).0;
        rows.push(BaselineRow {
            d: config.d,
            s_star: config.s_star,
            n: config.n,
            effective_sample: config.effective_sample(),
            proposed_mean_l2: mean(|r| r.proposed_l2),
            baseline_mean_l2: mean(|r| r.baseline_l2),
            proposed_mean_l1: mean(|r| r.proposed_l1),
            baseline_mean_l1: mean(|r| r.baseline_l1),
            trials: config.trials,
            failures: config.trials - ok.len(),
        });
        records.extend(ok);
    }
    Ok(BaselineComparison { rows, records })
}

pub fn baseline_csv(rows: &[BaselineRow]) -> String {
    let mut out = String::from(
        "d,s_star,n,effective_sample,proposed_mean_l2,baseline_mean_l2,proposed_mean_l1,baseline_mean_l1,trials,failures\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.d,
            r.s_star,
            r.n,
            fmt_g6(r.effective_sample),
            fmt_g6(r.proposed_mean_l2),
            fmt_g6(r.baseline_mean_l2),
            fmt_g6(r.proposed_mean_l1),
            fmt_g6(r.baseline_mean_l1),
            r.trials,
            r.failures
        );
    }
    out
}

pub fn paired_csv(records: &[PairedRecord]) -> String {
    let mut out =
        String::from("n,trial,proposed_l2,baseline_l2,proposed_l1,baseline_l1,baseline_lambda\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            r.trial_index,
            fmt_g6(r.proposed_l2),
            fmt_g6(r.baseline_l2),
            fmt_g6(r.proposed_l1),
            fmt_g6(r.baseline_l1),
            fmt_g6(r.baseline_lambda)
        );
    }
    out
}

/// Settings of the inference experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSettings {
    /// Values of the common nonzero coefficient `mu`.
    pub mus: Vec<f64>,
    pub lambda_rule: f64,
    /// `rho = c * sigma * sqrt(log d / n)`.
    pub rho_rule: f64,
    pub significance: f64,
    /// Coordinate outside the support (0-based); rejections are type-I errors.
    pub null_coordinate: usize,
    /// Coordinate inside the support (0-based); rejections count toward power.
    pub alt_coordinate: usize,
    pub fit: FitConfig<f64>,
}

impl Default for TableSettings {
    fn default() -> Self {
        Self {
            mus: (0..=10).map(|k| k as f64 * 0.05).collect(),
            lambda_rule: 3.0,
            rho_rule: 30.0,
            significance: 0.05,
            null_coordinate: 10,
            alt_coordinate: 0,
            fit: FitConfig::new(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub mu: f64,
    pub score_type1: f64,
    pub score_power: f64,
    pub wald_type1: f64,
    pub wald_power: f64,
    /// Fraction of Wald intervals for the in-support coordinate that cover `mu`.
    pub wald_coverage: f64,
    pub trials: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Decisions {
    score_null: bool,
    score_alt: bool,
    wald_null: bool,
    wald_alt: bool,
    covered: bool,
}

fn inference_trial(
    generator: &Generator,
    fit_config: &FitConfig<f64>,
    settings: &TableSettings,
    rho: f64,
    trial: usize,
) -> Result<Decisions> {
    let (data, truth) = generator.trial(trial as u64)?;
    let link = &generator.link;
    let beta_hat = fit(link, &data, fit_config)?.beta_hat;
    let cfg = |j| InferenceConfig::new(j, rho).with_significance(settings.significance);
    let null_cfg = cfg(settings.null_coordinate);
    let alt_cfg = cfg(settings.alt_coordinate);
    let wald_alt = wald_estimate(link, &data, beta_hat.view(), &alt_cfg)?;
    let target = truth.beta_star[settings.alt_coordinate];
    Ok(Decisions {
        score_null: score_test(link, &data, beta_hat.view(), &null_cfg)?.reject,
        score_alt: score_test(link, &data, beta_hat.view(), &alt_cfg)?.reject,
        wald_null: wald_estimate(link, &data, beta_hat.view(), &null_cfg)?.reject,
        wald_alt: wald_alt.reject,
        covered: wald_alt.ci_low <= target && target <= wald_alt.ci_high,
    })
}

/// Type-I error and power of both tests for each `mu`, with
/// `beta*_j = mu` on the first `s*` coordinates. Trial `t` uses the same
/// design and noise draws for every `mu`. A trial in which any fit or test
/// fails is excluded from all rates of its row and counted in `excluded`.
pub fn run_inference_table(config: &SimConfig, settings: &TableSettings) -> Result<Vec<TableRow>> {
    config.validate()?;
    for &j in &[settings.null_coordinate, settings.alt_coordinate] {
        if j >= config.d {
            return Err(Error::Config(format!(
                "coordinate {j} out of range for d = {}",
                config.d
            )));
        }
    }
    let rho = config.tuning_rule(settings.rho_rule);
    let mut fc = settings.fit.clone();
    fc.lambda = config.tuning_rule(settings.lambda_rule);
    fc.validate(config.d)?;
    settings
        .mus
        .iter()
        .map(|&mu| {
            let mut cell = config.clone();
            cell.beta_mode = BetaMode::Constant(mu);
            let generator = Generator::new(&cell)?;
            let outcomes: Vec<Result<Decisions>> = (0..cell.trials)
                .into_par_iter()
                .map(|t| inference_trial(&generator, &fc, settings, rho, t))
                .collect();
            let ok: Vec<Decisions> = outcomes.into_iter().filter_map(|o| o.ok()).collect();
            let m = ok.len() as f64;
            let rate = |f: fn(&Decisions) -> bool| ok.iter().filter(|d| f(d)).count() as f64 / m;
            Ok(TableRow {
                mu,
                score_type1: rate(|d| d.score_null),
                score_power: rate(|d| d.score_alt),
                wald_type1: rate(|d| d.wald_null),
                wald_power: rate(|d| d.wald_alt),
                wald_coverage: rate(|d| d.covered),
                trials: cell.trials,
                excluded: cell.trials - ok.len(),
            })
        })
        .collect()
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out =
        String::from("mu,score_type1,score_power,wald_type1,wald_power,trials,excluded\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_g6(r.mu),
            fmt_g6(r.score_type1),
            fmt_g6(r.score_power),
            fmt_g6(r.wald_type1),
            fmt_g6(r.wald_power),
            r.trials,
            r.excluded
        );
    }
    out
}

/// Formats like C's `%.6g`: six significant digits, trailing zeros removed,
/// scientific notation for exponents below -4 or above 5.
pub fn fmt_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        let decimals = (5 - exp) as usize;
        trim(&format!("{x:.decimals$}"))
    }
}
