//! `nlsparse` command-line front end.
//!
//! Coordinates on the command line are 1-based (`--coordinate 1` is the first
//! covariate). Results go to `--output` (default `-`, standard output).

mod failure;
mod settings;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nlsparse::diagnostics::{
    check_gradients, sample_gram, sparse_eigen_report, MAX_ENUMERATION_DIM,
};
use nlsparse::linalg::toeplitz_covariance;
use nlsparse::simulate::{
    baseline_csv, paired_csv, run_baseline_comparison, run_estimation_sweep, run_inference_table,
    sweep_csv, table_csv, BetaMode, CrossValidation, EstimationSettings, SimConfig, TableSettings,
};
use nlsparse::{builtin_link, fit, score_test, wald_estimate, Data, Inference, Link};

use failure::Failure;
use settings::{OneOrMany, Settings};

/// Environment variable holding the default worker count for `simulate`.
const THREADS_ENV: &str = "NLSPARSE_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "nlsparse",
    version,
    about = "Sparse nonlinear regression: estimation, inference and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the l1-penalized least-squares estimator
    Fit(FitArgs),
    /// Test H0: beta_j = c with the decorrelated score or Wald test
    Test(TestArgs),
    /// Wald confidence interval for one coordinate
    Ci(CiArgs),
    /// Run a Monte Carlo experiment and write CSV
    Simulate(SimulateArgs),
    /// Numerical diagnostics
    Check(CheckArgs),
}

#[derive(Args, Debug)]
struct IoArgs {
    /// TOML file with settings (keys as in --set)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one setting, e.g. --set tol=1e-6 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file, or - for standard output
    #[arg(long, short, default_value = "-", value_name = "PATH")]
    output: String,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// CSV with columns y,x1,...,xd (optional header row)
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    /// Link function: identity or paper (2x + cos x)
    #[arg(long)]
    link: Option<String>,
}

#[derive(Args, Debug)]
struct PenaltyArgs {
    /// Penalty level lambda
    #[arg(long)]
    lambda: Option<f64>,
    /// Constant c in lambda = c * sigma * sqrt(log d / n) [default: 3]
    #[arg(long)]
    lambda_rule: Option<f64>,
    /// Noise standard deviation used by the lambda and rho rules
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Relative-change stopping tolerance [default: 1e-5]
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap [default: 10000]
    #[arg(long)]
    max_iter: Option<usize>,
    /// Line-search expansion cap [default: 100]
    #[arg(long)]
    max_linesearch: Option<usize>,
    /// Line-search growth factor [default: 2]
    #[arg(long)]
    eta: Option<f64>,
    /// Sufficient-decrease constant [default: 1e-5]
    #[arg(long)]
    zeta: Option<f64>,
    /// Nonmonotone memory M [default: 5]
    #[arg(long)]
    memory: Option<usize>,
    /// Lower stepsize safeguard [default: 1e-30]
    #[arg(long)]
    alpha_min: Option<f64>,
    /// Upper stepsize safeguard [default: 1e30]
    #[arg(long)]
    alpha_max: Option<f64>,
}

#[derive(Args, Debug)]
struct InferenceArgs {
    /// Tested coordinate, 1-based
    #[arg(long)]
    coordinate: Option<usize>,
    /// Dantzig-selector tuning parameter rho
    #[arg(long)]
    rho: Option<f64>,
    /// Constant c in rho = c * sigma * sqrt(log d / n) [default: 30]
    #[arg(long)]
    rho_rule: Option<f64>,
    /// Significance level delta [default: 0.05]
    #[arg(long)]
    delta: Option<f64>,
    /// Hypothesized value c in H0: beta_j = c [default: 0]
    #[arg(long)]
    null_value: Option<f64>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Score,
    Wald,
}

#[derive(Args, Debug)]
struct TestArgs {
    /// Test statistic
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[command(flatten)]
    inference: InferenceArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Args, Debug)]
struct CiArgs {
    #[command(flatten)]
    inference: InferenceArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Experiment {
    /// Estimation error over a grid of (d, s*, n)
    Sweep,
    /// Proposed estimator against a Lasso on inverted responses
    Baseline,
    /// Type-I error and power of both tests over mu
    Table,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    experiment: Experiment,
    /// Sample sizes (comma-separated)
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Dimensions (comma-separated)
    #[arg(long, value_delimiter = ',')]
    d: Vec<usize>,
    /// Sparsity levels (comma-separated)
    #[arg(long = "s-star", value_delimiter = ',')]
    s_star: Vec<usize>,
    /// Trials per configuration [default: 100, 500 for table]
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Noise standard deviation [default: 1]
    #[arg(long)]
    sigma: Option<f64>,
    /// Link function [default: paper]
    #[arg(long)]
    link: Option<String>,
    /// Design correlation r in Sigma_jk = r^|j-k| [default: 0.95]
    #[arg(long)]
    toeplitz_rho: Option<f64>,
    /// Lower end of U(lo, hi) for the nonzero coefficients [default: 0]
    #[arg(long)]
    beta_lo: Option<f64>,
    /// Upper end of U(lo, hi) [default: 2]
    #[arg(long)]
    beta_hi: Option<f64>,
    /// Use this constant for every nonzero coefficient instead of U(lo, hi)
    #[arg(long)]
    beta_constant: Option<f64>,
    /// Constant c in lambda = c * sigma * sqrt(log d / n) [default: 3]
    #[arg(long)]
    lambda_rule: Option<f64>,
    /// Constant c in rho = c * sigma * sqrt(log d / n) (table) [default: 30]
    #[arg(long)]
    rho_rule: Option<f64>,
    /// Significance level (table) [default: 0.05]
    #[arg(long)]
    delta: Option<f64>,
    /// Values of mu (table, comma-separated) [default: 0,0.05,...,0.5]
    #[arg(long, value_delimiter = ',')]
    mus: Vec<f64>,
    /// Coordinate tested for type-I error, 1-based (table) [default: 11]
    #[arg(long)]
    null_coordinate: Option<usize>,
    /// Coordinate tested for power, 1-based (table) [default: 1]
    #[arg(long)]
    alt_coordinate: Option<usize>,
    /// Cross-validation folds (baseline) [default: 5]
    #[arg(long)]
    folds: Option<usize>,
    /// Cross-validation grid size (baseline) [default: 30]
    #[arg(long)]
    grid_size: Option<usize>,
    /// Write per-trial paired errors instead of the summary (baseline)
    #[arg(long)]
    per_trial: bool,
    /// Worker threads [default: $NLSPARSE_THREADS, else all cores]
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    /// Analytic loss derivatives against central differences
    Gradients,
    /// Exhaustive sparse eigenvalues of a Gram matrix
    SparseEigen,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long, value_enum)]
    kind: CheckKind,
    /// Random instances (gradients) [default: 50]
    #[arg(long)]
    trials: Option<usize>,
    /// Observations per instance (gradients) [default: 20]
    #[arg(long)]
    n: Option<usize>,
    /// Dimension [default: 8]
    #[arg(long)]
    d: Option<usize>,
    /// Link function (gradients) [default: both builtins]
    #[arg(long)]
    link: Option<String>,
    /// Seed (gradients) [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Sparsity level k (sparse-eigen) [default: d]
    #[arg(long)]
    k: Option<usize>,
    /// s* for the design condition (sparse-eigen, with --k-star)
    #[arg(long = "s-star")]
    s_star: Option<usize>,
    /// k* for the design condition (sparse-eigen, with --s-star)
    #[arg(long = "k-star")]
    k_star: Option<usize>,
    /// Correlation of the population Toeplitz matrix (sparse-eigen) [default: 0.95]
    #[arg(long)]
    toeplitz_rho: Option<f64>,
    /// Use the sample Gram matrix of this CSV's design instead (sparse-eigen)
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    #[command(flatten)]
    io: IoArgs,
}

impl SolverArgs {
    fn settings(&self) -> Settings {
        Settings {
            tol: self.tol,
            max_iter: self.max_iter,
            max_linesearch: self.max_linesearch,
            eta: self.eta,
            zeta: self.zeta,
            memory: self.memory,
            alpha_min: self.alpha_min,
            alpha_max: self.alpha_max,
            ..Default::default()
        }
    }
}

impl PenaltyArgs {
    fn settings(&self) -> Settings {
        Settings {
            lambda: self.lambda,
            lambda_rule: self.lambda_rule,
            sigma: self.sigma,
            ..Default::default()
        }
    }
}

impl InferenceArgs {
    fn settings(&self) -> Settings {
        Settings {
            coordinate: self.coordinate,
            rho: self.rho,
            rho_rule: self.rho_rule,
            delta: self.delta,
            null_value: self.null_value,
            ..Default::default()
        }
    }
}

fn non_empty<T>(v: &[T]) -> Option<OneOrMany<T>>
where
    T: Clone,
{
    (!v.is_empty()).then(|| OneOrMany::Many(v.to_vec()))
}

fn emit(target: &str, text: &str) -> Result<(), Failure> {
    if target == "-" {
        print!("{text}");
        Ok(())
    } else {
        std::fs::write(target, text)
            .map_err(|e| Failure::usage(format!("cannot write {target}: {e}")))
    }
}

fn load_data(path: &Path) -> Result<Data, Failure> {
    if !path.exists() {
        return Err(Failure::usage(format!(
            "data file not found: {}",
            path.display()
        )));
    }
    Ok(Data::read_csv(path)?)
}

fn link_of(s: &Settings) -> Result<Link, Failure> {
    Ok(builtin_link(s.link.as_deref().unwrap_or("paper"))?)
}

fn rate(data: &Data) -> f64 {
    ((data.d() as f64).ln() / data.n() as f64).sqrt()
}

fn fit_config(s: &Settings, lambda: f64) -> nlsparse::Config {
    let mut fc = nlsparse::Config::new(lambda);
    fc.tol = s.tol.unwrap_or(fc.tol);
    fc.max_iter = s.max_iter.unwrap_or(fc.max_iter);
    fc.max_linesearch = s.max_linesearch.unwrap_or(fc.max_linesearch);
    fc.eta = s.eta.unwrap_or(fc.eta);
    fc.zeta = s.zeta.unwrap_or(fc.zeta);
    fc.memory = s.memory.unwrap_or(fc.memory);
    fc.alpha_min = s.alpha_min.unwrap_or(fc.alpha_min);
    fc.alpha_max = s.alpha_max.unwrap_or(fc.alpha_max);
    fc
}

fn resolve_lambda(s: &Settings, data: &Data) -> Result<f64, Failure> {
    match (s.lambda, s.sigma) {
        (Some(l), _) => Ok(l),
        (None, Some(sigma)) => Ok(s.lambda_rule.unwrap_or(3.0) * sigma * rate(data)),
        (None, None) => Err(Failure::usage(
            "give --lambda, or --sigma to use the lambda rule",
        )),
    }
}

fn resolve_rho(s: &Settings, data: &Data) -> Result<f64, Failure> {
    match (s.rho, s.sigma) {
        (Some(r), _) => Ok(r),
        (None, Some(sigma)) => Ok(s.rho_rule.unwrap_or(30.0) * sigma * rate(data)),
        (None, None) => Err(Failure::usage("give --rho, or --sigma to use the rho rule")),
    }
}

fn fit_document(link: &Link, data: &Data, lambda: f64, result: &nlsparse::Fit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "link={}", link.name());
    let _ = writeln!(out, "n={}", data.n());
    let _ = writeln!(out, "d={}", data.d());
    let _ = writeln!(out, "lambda={lambda}");
    let _ = writeln!(out, "iterations={}", result.iterations);
    let _ = writeln!(out, "converged={}", result.converged);
    let _ = writeln!(out, "objective={}", result.objective());
    let _ = writeln!(out, "kkt_residual={}", result.kkt_residual);
    let support: Vec<(usize, f64)> = result
        .beta_hat
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| (j + 1, *v))
        .collect();
    let _ = writeln!(out, "nonzeros={}", support.len());
    let _ = writeln!(out, "[beta_hat]");
    for (j, v) in support {
        let _ = writeln!(out, "{j} {v}");
    }
    out
}

fn run_fit(args: FitArgs) -> Result<(), Failure> {
    let flags = Settings {
        link: args.data.link.clone(),
        ..Default::default()
    }
    .over(args.penalty.settings())
    .over(args.solver.settings());
    let s = Settings::layered(flags, args.io.config.as_deref(), &args.io.overrides)?;
    let data = load_data(&args.data.data)?;
    let link = link_of(&s)?;
    let lambda = resolve_lambda(&s, &data)?;
    let result = fit(&link, &data, &fit_config(&s, lambda))?;
    emit(
        &args.io.output,
        &fit_document(&link, &data, lambda, &result),
    )
}

struct Prepared {
    link: Link,
    data: Data,
    lambda: f64,
    config: Inference,
    beta_hat: ndarray::Array1<f64>,
}

fn prepare_inference(
    inference: &InferenceArgs,
    data_args: &DataArgs,
    penalty: &PenaltyArgs,
    solver: &SolverArgs,
    io: &IoArgs,
    extra: Settings,
) -> Result<(Prepared, Settings), Failure> {
    let flags = extra
        .over(Settings {
            link: data_args.link.clone(),
            ..Default::default()
        })
        .over(inference.settings())
        .over(penalty.settings())
        .over(solver.settings());
    let s = Settings::layered(flags, io.config.as_deref(), &io.overrides)?;
    let data = load_data(&data_args.data)?;
    let link = link_of(&s)?;
    let coordinate = s
        .coordinate
        .ok_or_else(|| Failure::usage("--coordinate is required"))?;
    if coordinate == 0 || coordinate > data.d() {
        return Err(Failure::usage(format!(
            "--coordinate must lie in 1..={}, got {coordinate}",
            data.d()
        )));
    }
    let lambda = resolve_lambda(&s, &data)?;
    let rho = resolve_rho(&s, &data)?;
    let config = Inference::new(coordinate - 1, rho)
        .with_significance(s.delta.unwrap_or(0.05))
        .with_null_value(s.null_value.unwrap_or(0.0));
    let beta_hat = fit(&link, &data, &fit_config(&s, lambda))?.beta_hat;
    Ok((
        Prepared {
            link,
            data,
            lambda,
            config,
            beta_hat,
        },
        s,
    ))
}

fn common_lines(out: &mut String, p: &Prepared) {
    let _ = writeln!(out, "coordinate={}", p.config.coordinate + 1);
    let _ = writeln!(out, "null_value={}", p.config.null_value);
    let _ = writeln!(out, "delta={}", p.config.significance);
    let _ = writeln!(out, "lambda={}", p.lambda);
    let _ = writeln!(out, "rho={}", p.config.rho);
}

fn run_test(args: TestArgs) -> Result<(), Failure> {
    let method_flag = args.method.map(|m| match m {
        Method::Score => "score".to_string(),
        Method::Wald => "wald".to_string(),
    });
    let (p, s) = prepare_inference(
        &args.inference,
        &args.data,
        &args.penalty,
        &args.solver,
        &args.io,
        Settings {
            method: method_flag,
            ..Default::default()
        },
    )?;
    let method = s
        .method
        .ok_or_else(|| Failure::usage("--method is required (score or wald)"))?;
    let mut out = String::new();
    let _ = writeln!(out, "method={method}");
    common_lines(&mut out, &p);
    match method.as_str() {
        "score" => {
            let r = score_test(&p.link, &p.data, p.beta_hat.view(), &p.config)?;
            let _ = writeln!(out, "f_s={}", r.f_s);
            let _ = writeln!(out, "sigma_s={}", r.sigma_s);
            let _ = writeln!(out, "statistic={}", r.statistic);
            let _ = writeln!(out, "p_value={}", r.p_value);
            let _ = writeln!(out, "d_hat_l1={}", r.d_hat.l1_norm);
            let _ = writeln!(out, "reject={}", r.reject);
        }
        "wald" => {
            let r = wald_estimate(&p.link, &p.data, p.beta_hat.view(), &p.config)?;
            let _ = writeln!(out, "alpha_bar={}", r.alpha_bar);
            let _ = writeln!(out, "sigma_w={}", r.sigma_w);
            let _ = writeln!(out, "statistic={}", r.statistic);
            let _ = writeln!(out, "p_value={}", r.p_value);
            let _ = writeln!(out, "d_hat_l1={}", r.d_hat.l1_norm);
            let _ = writeln!(out, "reject={}", r.reject);
        }
        other => {
            return Err(Failure::usage(format!(
                "unknown method '{other}' (expected score or wald)"
            )))
        }
    }
    emit(&args.io.output, &out)
}

fn run_ci(args: CiArgs) -> Result<(), Failure> {
    let (p, _) = prepare_inference(
        &args.inference,
        &args.data,
        &args.penalty,
        &args.solver,
        &args.io,
        Settings::default(),
    )?;
    let r = wald_estimate(&p.link, &p.data, p.beta_hat.view(), &p.config)?;
    let mut out = String::new();
    common_lines(&mut out, &p);
    let _ = writeln!(out, "level={}", 1.0 - p.config.significance);
    let _ = writeln!(out, "alpha_bar={}", r.alpha_bar);
    let _ = writeln!(out, "sigma_w={}", r.sigma_w);
    let _ = writeln!(out, "ci=[{}, {}]", r.ci_low, r.ci_high);
    emit(&args.io.output, &out)
}

fn sim_configs(s: &Settings, default_trials: usize) -> Result<Vec<SimConfig>, Failure> {
    let list = |v: &Option<OneOrMany<usize>>, name: &str| {
        v.as_ref()
            .map(OneOrMany::to_vec)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| Failure::usage(format!("--{name} is required")))
    };
    let ns = list(&s.n, "n")?;
    let ds = list(&s.d, "d")?;
    let ss = list(&s.s_star, "s-star")?;
    let mut out = Vec::new();
    for &d in &ds {
        for &s_star in &ss {
            for &n in &ns {
                let mut c = SimConfig::new(n, d, s_star);
                c.link_name = s.link.clone().unwrap_or_else(|| "paper".into());
                c.noise_sd = s.sigma.unwrap_or(1.0);
                c.toeplitz_rho = s.toeplitz_rho.unwrap_or(0.95);
                c.seed = s.seed.unwrap_or(0);
                c.trials = s.trials.unwrap_or(default_trials);
                c.beta_mode = match s.beta_constant {
                    Some(mu) => BetaMode::Constant(mu),
                    None => BetaMode::Uniform {
                        lo: s.beta_lo.unwrap_or(0.0),
                        hi: s.beta_hi.unwrap_or(2.0),
                    },
                };
                c.validate()?;
                out.push(c);
            }
        }
    }
    Ok(out)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if let Some(t) = flag {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v.trim().parse::<usize>().map(Some).map_err(|_| {
            Failure::usage(format!(
                "{THREADS_ENV} must be a nonnegative integer, got '{v}'"
            ))
        }),
        _ => Ok(None),
    }
}

fn with_pool<R: Send>(
    threads: Option<usize>,
    job: impl FnOnce() -> R + Send,
) -> Result<R, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::usage(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(job))
}

fn one_based(j: usize, name: &str) -> Result<usize, Failure> {
    j.checked_sub(1)
        .ok_or_else(|| Failure::usage(format!("--{name} is 1-based, got 0")))
}

fn run_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let flags = Settings {
        n: non_empty(&args.n),
        d: non_empty(&args.d),
        s_star: non_empty(&args.s_star),
        trials: args.trials,
        seed: args.seed,
        sigma: args.sigma,
        link: args.link.clone(),
        toeplitz_rho: args.toeplitz_rho,
        beta_lo: args.beta_lo,
        beta_hi: args.beta_hi,
        beta_constant: args.beta_constant,
        lambda_rule: args.lambda_rule,
        rho_rule: args.rho_rule,
        delta: args.delta,
        mus: non_empty(&args.mus),
        null_coordinate: args.null_coordinate,
        alt_coordinate: args.alt_coordinate,
        folds: args.folds,
        grid_size: args.grid_size,
        threads: args.threads,
        ..Default::default()
    }
    .over(args.solver.settings());
    let s = Settings::layered(flags, args.io.config.as_deref(), &args.io.overrides)?;
    let threads = thread_count(s.threads)?;
    let fit = fit_config(&s, 0.0);
    let lambda_rule = s.lambda_rule.unwrap_or(3.0);

    let csv = match args.experiment {
        Experiment::Sweep => {
            let grid = sim_configs(&s, 100)?;
            let settings = EstimationSettings { lambda_rule, fit };
            let points = with_pool(threads, || run_estimation_sweep(&grid, &settings))??;
            sweep_csv(&points.into_iter().map(|p| p.row).collect::<Vec<_>>())
        }
        Experiment::Baseline => {
            let grid = sim_configs(&s, 100)?;
            let settings = EstimationSettings { lambda_rule, fit };
            let defaults = CrossValidation::default();
            let cv = CrossValidation {
                folds: s.folds.unwrap_or(defaults.folds),
                grid_size: s.grid_size.unwrap_or(defaults.grid_size),
                ..defaults
            };
            let comparison =
                with_pool(threads, || run_baseline_comparison(&grid, &settings, &cv))??;
            if args.per_trial {
                paired_csv(&comparison.records)
            } else {
                baseline_csv(&comparison.rows)
            }
        }
        Experiment::Table => {
            let grid = sim_configs(&s, 500)?;
            let [config] = grid.as_slice() else {
                return Err(Failure::usage("table takes a single n, d and s-star"));
            };
            let defaults = TableSettings::default();
            let settings = TableSettings {
                mus: s
                    .mus
                    .as_ref()
                    .map(OneOrMany::to_vec)
                    .unwrap_or(defaults.mus),
                lambda_rule,
                rho_rule: s.rho_rule.unwrap_or(defaults.rho_rule),
                significance: s.delta.unwrap_or(defaults.significance),
                null_coordinate: one_based(s.null_coordinate.unwrap_or(11), "null-coordinate")?,
                alt_coordinate: one_based(s.alt_coordinate.unwrap_or(1), "alt-coordinate")?,
                fit,
            };
            let rows = with_pool(threads, || run_inference_table(config, &settings))??;
            table_csv(&rows)
        }
    };
    emit(&args.io.output, &csv)
}

fn run_check(args: CheckArgs) -> Result<(), Failure> {
    let flags = Settings {
        trials: args.trials,
        n: args.n.map(OneOrMany::One),
        d: args.d.map(OneOrMany::One),
        link: args.link.clone(),
        seed: args.seed,
        k: args.k,
        s_star: args.s_star.map(OneOrMany::One),
        k_star: args.k_star,
        toeplitz_rho: args.toeplitz_rho,
        ..Default::default()
    };
    let s = Settings::layered(flags, args.io.config.as_deref(), &args.io.overrides)?;
    let single = |v: &Option<OneOrMany<usize>>, name: &str| -> Result<Option<usize>, Failure> {
        match v.as_ref().map(OneOrMany::to_vec).as_deref() {
            None => Ok(None),
            Some([x]) => Ok(Some(*x)),
            Some(_) => Err(Failure::usage(format!("--{name} takes a single value"))),
        }
    };
    let mut out = String::new();
    let passed = match args.kind {
        CheckKind::Gradients => {
            let n = single(&s.n, "n")?.unwrap_or(20);
            let d = single(&s.d, "d")?.unwrap_or(8);
            let trials = s.trials.unwrap_or(50);
            let links = match s.link.as_deref() {
                Some(name) => vec![builtin_link::<f64>(name)?],
                None => vec![Link::identity(), Link::two_x_plus_cos()],
            };
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed.unwrap_or(0));
            let mut worst = 0.0f64;
            let mut all = true;
            for link in &links {
                let report = check_gradients(link, n, d, trials, &mut rng)?;
                let _ = writeln!(
                    out,
                    "link={} trials={} max_rel_gradient={:e} max_rel_hessian={:e}",
                    link.name(),
                    report.trials,
                    report.max_rel_gradient,
                    report.max_rel_hessian
                );
                worst = worst.max(report.max_rel_err());
                all &= report.passed;
            }
            let _ = writeln!(
                out,
                "{} max_rel_err={worst:e}",
                if all { "PASS" } else { "FAIL" }
            );
            all
        }
        CheckKind::SparseEigen => {
            let matrix = match &args.data {
                Some(path) => sample_gram(load_data(path)?.design().view()),
                None => {
                    let d = single(&s.d, "d")?.unwrap_or(8);
                    if d > MAX_ENUMERATION_DIM {
                        return Err(nlsparse::Error::TooLarge {
                            d,
                            max: MAX_ENUMERATION_DIM,
                        }
                        .into());
                    }
                    toeplitz_covariance(d, s.toeplitz_rho.unwrap_or(0.95))
                }
            };
            let d = matrix.nrows();
            let k = s.k.unwrap_or(d);
            let condition = match (single(&s.s_star, "s-star")?, s.k_star) {
                (Some(a), Some(b)) => Some((a, b)),
                (None, None) => None,
                _ => return Err(Failure::usage("--s-star and --k-star go together")),
            };
            let report = with_pool(Some(1), || sparse_eigen_report(matrix.view(), k, condition))??;
            let _ = writeln!(out, "d={d}");
            let _ = writeln!(out, "k={}", report.k);
            let _ = writeln!(out, "rho_minus={}", report.rho_minus);
            let _ = writeln!(out, "rho_plus={}", report.rho_plus);
            let _ = writeln!(out, "design_bound={}", report.design_bound);
            if let Some(holds) = report.condition_holds {
                let _ = writeln!(out, "condition_holds={holds}");
            }
            let passed = report.condition_holds.unwrap_or(true);
            let _ = writeln!(out, "{}", if passed { "PASS" } else { "FAIL" });
            passed
        }
    };
    emit(&args.io.output, &out)?;
    if passed {
        Ok(())
    } else {
        Err(Failure::numerical("check failed"))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Test(a) => run_test(a),
        Command::Ci(a) => run_ci(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Check(a) => run_check(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let simulate = matches!(cli.command, Command::Simulate(_));
    let outcome = if simulate {
        run(cli)
    } else {
        with_pool(Some(1), || run(cli)).and_then(|r| r)
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
