//! Domain types: link functions, observed samples, solver configuration and
//! sparse ground truth.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// A known, strictly increasing link `f` together with its first two
/// derivatives and the global bounds `a <= f'(x) <= b`, `|f''(x)| <= R`.
#[derive(Clone)]
pub struct LinkFunction<T> {
    name: String,
    eval: ScalarFn<T>,
    deriv: ScalarFn<T>,
    deriv2: ScalarFn<T>,
    lower_slope: T,
    upper_slope: T,
    curvature_bound: T,
}

impl<T: Scalar> LinkFunction<T> {
    /// Builds a link from closures. Fails unless `0 < lower_slope <= upper_slope`
    /// and `curvature_bound >= 0`.
    pub fn new<F, D, D2>(
        name: impl Into<String>,
        eval: F,
        deriv: D,
        deriv2: D2,
        lower_slope: T,
        upper_slope: T,
        curvature_bound: T,
    ) -> Result<Self>
    where
        F: Fn(T) -> T + Send + Sync + 'static,
        D: Fn(T) -> T + Send + Sync + 'static,
        D2: Fn(T) -> T + Send + Sync + 'static,
    {
        if !(lower_slope > T::zero() && lower_slope <= upper_slope && upper_slope.is_finite()) {
            return Err(Error::Config(format!(
                "link slopes must satisfy 0 < a <= b, got a={lower_slope}, b={upper_slope}"
            )));
        }
        if !(curvature_bound >= T::zero()) {
            return Err(Error::Config(format!(
                "curvature bound must be nonnegative, got {curvature_bound}"
            )));
        }
        Ok(Self {
            name: name.into(),
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
            deriv2: Arc::new(deriv2),
            lower_slope,
            upper_slope,
            curvature_bound,
        })
    }

    /// `f(x) = x`.
    pub fn identity() -> Self {
        Self::new(
            "identity",
            |x| x,
            |_| T::one(),
            |_| T::zero(),
            T::one(),
            T::one(),
            T::zero(),
        )
        .expect("identity link is valid")
    }

    /// `f(x) = 2x + cos(x)`, the nonlinear link used in the simulation studies.
    /// `f'(x) = 2 - sin(x)` lies in `[1, 3]`; the advertised bounds are `[1, 4]`.
    pub fn two_x_plus_cos() -> Self {
        let two = T::of(2.0);
        Self::new(
            "paper",
            move |x: T| two * x + x.cos(),
            move |x: T| two - x.sin(),
            |x: T| -x.cos(),
            T::one(),
            T::of(4.0),
            T::one(),
        )
        .expect("2x + cos(x) link is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        (self.eval)(x)
    }

    #[inline]
    pub fn deriv(&self, x: T) -> T {
        (self.deriv)(x)
    }

    #[inline]
    pub fn deriv2(&self, x: T) -> T {
        (self.deriv2)(x)
    }

    pub fn lower_slope(&self) -> T {
        self.lower_slope
    }

    pub fn upper_slope(&self) -> T {
        self.upper_slope
    }

    pub fn curvature_bound(&self) -> T {
        self.curvature_bound
    }

    /// Solves `f(z) = y` for `z`. See [`invert_link`].
    pub fn invert(&self, y: T) -> Result<T> {
        invert_link(self, y)
    }
}

impl<T> fmt::Debug for LinkFunction<T>
where
    T: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinkFunction")
            .field("name", &self.name)
            .field("lower_slope", &self.lower_slope)
            .field("upper_slope", &self.upper_slope)
            .field("curvature_bound", &self.curvature_bound)
            .finish_non_exhaustive()
    }
}

/// Looks up a registered link by name: `"identity"` or `"paper"` (`2x + cos x`).
pub fn builtin_link<T: Scalar>(name: &str) -> Result<LinkFunction<T>> {
    match name {
        "identity" => Ok(LinkFunction::identity()),
        "paper" => Ok(LinkFunction::two_x_plus_cos()),
        other => Err(Error::Config(format!(
            "unknown link '{other}' (expected 'identity' or 'paper')"
        ))),
    }
}

const MAX_DOUBLINGS: usize = 200;
const MAX_ROOT_STEPS: usize = 500;

/// Numerical inverse of a strictly increasing link.
///
/// Expands `[-1, 1]` by doubling until it brackets `y`, then runs Newton steps
/// that fall back to bisection whenever the Newton iterate leaves the bracket.
/// Returns `z` with `|f(z) - y|` at rounding level (below `1e-10` for `f64`
/// and `|y| <= 1e4`).
pub fn invert_link<T: Scalar>(link: &LinkFunction<T>, y: T) -> Result<T> {
    if !y.is_finite() {
        return Err(Error::Input(format!("cannot invert non-finite value {y}")));
    }
    let two = T::of(2.0);
    let mut lo = -T::one();
    let mut hi = T::one();
    let mut doublings = 0;
    while link.eval(lo) > y {
        hi = lo;
        lo = lo * two;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !lo.is_finite() {
            return Err(Error::Numerical(format!("no bracket found for f^-1({y})")));
        }
    }
    while link.eval(hi) < y {
        lo = hi;
        hi = hi * two;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::Numerical(format!("no bracket found for f^-1({y})")));
        }
    }

    let tol = T::of(4.0) * T::epsilon() * y.abs().max(T::one());
    let mut z = (lo + hi) / two;
    for _ in 0..MAX_ROOT_STEPS {
        let r = link.eval(z) - y;
        if r.abs() <= tol {
            return Ok(z);
        }
        if r > T::zero() {
            hi = z;
        } else {
            lo = z;
        }
        let slope = link.deriv(z);
        let newton = z - r / slope;
        z = if slope > T::zero() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) / two
        };
        if hi - lo <= T::epsilon() * z.abs().max(T::one()) {
            return Ok(z);
        }
    }
    Ok(z)
}

/// Observed sample `{(y_i, x_i)}`: design rows are `x_i^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    design: Array2<T>,
    response: Array1<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(design: Array2<T>, response: Array1<T>) -> Result<Self> {
        let (n, d) = design.dim();
        if n == 0 || d == 0 {
            return Err(Error::Input(format!(
                "dataset must be non-empty, got {n}x{d}"
            )));
        }
        if response.len() != n {
            return Err(Error::Input(format!(
                "design has {n} rows but response has {} entries",
                response.len()
            )));
        }
        if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Input("dataset contains non-finite entries".into()));
        }
        Ok(Self { design, response })
    }

    pub fn design(&self) -> &Array2<T> {
        &self.design
    }

    pub fn response(&self) -> &Array1<T> {
        &self.response
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    /// Number of covariates.
    pub fn d(&self) -> usize {
        self.design.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.design.row(i)
    }

    /// Same design, different response (used by the inverted-link baseline).
    pub fn with_response(&self, response: Array1<T>) -> Result<Self> {
        Self::new(self.design.clone(), response)
    }

    /// Subset of rows, in the order given.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let design = self.design.select(ndarray::Axis(0), rows);
        let response = self.response.select(ndarray::Axis(0), rows);
        Self::new(design, response)
    }

    /// Parses the CSV layout `y,x1,...,xd`. A first line whose first cell is
    /// not a number is treated as a header and skipped.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<T>> = Vec::new();
        let mut width = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if rows.is_empty() && width.is_none() && cells[0].parse::<f64>().is_err() {
                width = Some(cells.len());
                continue;
            }
            let parsed = cells
                .iter()
                .map(|c| {
                    c.parse::<f64>().map(T::of).map_err(|_| {
                        Error::Input(format!(
                            "line {}: cannot parse '{c}' as a number",
                            lineno + 1
                        ))
                    })
                })
                .collect::<Result<Vec<T>>>()?;
            if parsed.len() < 2 {
                return Err(Error::Input(format!(
                    "line {}: need a response and at least one covariate",
                    lineno + 1
                )));
            }
            match width {
                Some(w) if w != parsed.len() => {
                    return Err(Error::Input(format!(
                        "line {}: expected {w} columns, found {}",
                        lineno + 1,
                        parsed.len()
                    )))
                }
                _ => width = Some(parsed.len()),
            }
            rows.push(parsed);
        }
        if rows.is_empty() {
            return Err(Error::Input("CSV contains no observations".into()));
        }
        let n = rows.len();
        let d = rows[0].len() - 1;
        let response = Array1::from_iter(rows.iter().map(|r| r[0]));
        let design = Array2::from_shape_fn((n, d), |(i, j)| rows[i][j + 1]);
        Self::new(design, response)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    /// Writes the `y,x1..xd` layout with a header row, full round-trip precision.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("y");
        for j in 1..=self.d() {
            out.push_str(&format!(",x{j}"));
        }
        out.push('\n');
        for i in 0..self.n() {
            out.push_str(&format!("{:?}", self.response[i].to_f64_lossy()));
            for v in self.design.row(i) {
                out.push_str(&format!(",{:?}", v.to_f64_lossy()));
            }
            out.push('\n');
        }
        out
    }
}

/// Tuning parameters of the proximal gradient solver.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<T> {
    pub lambda: T,
    /// Line-search growth factor (> 1).
    pub eta: T,
    /// Sufficient-decrease constant.
    pub zeta: T,
    /// Nonmonotone window: acceptance compares against the last `memory + 1` objectives.
    pub memory: usize,
    pub alpha_min: T,
    pub alpha_max: T,
    /// Relative-change stopping threshold.
    pub tol: T,
    pub max_iter: usize,
    pub max_linesearch: usize,
    /// Starting point; `None` means the zero vector.
    pub init: Option<Array1<T>>,
}

impl<T: Scalar> FitConfig<T> {
    /// Defaults used in the simulation studies: `eta = 2`, `M = 5`,
    /// `zeta = tol = 1e-5`, `alpha_min = 1e-30`, `alpha_max = 1e30`.
    pub fn new(lambda: T) -> Self {
        Self {
            lambda,
            eta: T::of(2.0),
            zeta: T::of(1e-5),
            memory: 5,
            alpha_min: T::of(1e-30).max(T::min_positive_value()),
            alpha_max: T::of(1e30).min(T::max_value()),
            tol: T::of(1e-5),
            max_iter: 10_000,
            max_linesearch: 100,
            init: None,
        }
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_init(mut self, init: Array1<T>) -> Self {
        self.init = Some(init);
        self
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return bad(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            ));
        }
        if !(self.eta > T::one()) {
            return bad(format!("eta must exceed 1, got {}", self.eta));
        }
        if !(self.zeta > T::zero()) {
            return bad(format!("zeta must be positive, got {}", self.zeta));
        }
        if self.memory == 0 {
            return bad("memory must be at least 1".into());
        }
        if !(self.alpha_min > T::zero() && self.alpha_min < T::one() && self.alpha_max > T::one()) {
            return bad(format!(
                "need 0 < alpha_min < 1 < alpha_max, got alpha_min={}, alpha_max={}",
                self.alpha_min, self.alpha_max
            ));
        }
        if !(self.tol > T::zero()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 || self.max_linesearch == 0 {
            return bad("max_iter and max_linesearch must be at least 1".into());
        }
        if let Some(init) = &self.init {
            if init.len() != d {
                return Err(Error::Input(format!(
                    "initial point has length {}, expected {d}",
                    init.len()
                )));
            }
        }
        Ok(())
    }
}

/// The sparse parameter a synthetic dataset was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityGroundTruth<T> {
    pub beta_star: Array1<T>,
    pub support_size: usize,
}

impl<T: Scalar> SparsityGroundTruth<T> {
    pub fn new(beta_star: Array1<T>) -> Self {
        let support_size = beta_star.iter().filter(|v| !v.is_zero()).count();
        Self {
            beta_star,
            support_size,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn builtin_values_at_zero() {
        let f: LinkFunction<f64> = builtin_link("paper").unwrap();
        assert_eq!(f.eval(0.0), 1.0);
        assert_eq!(f.deriv(0.0), 2.0);
        assert_eq!(f.deriv2(0.0), -1.0);
        assert_eq!((f.lower_slope(), f.upper_slope()), (1.0, 4.0));
        assert_eq!(f.curvature_bound(), 1.0);

        let id: LinkFunction<f64> = builtin_link("identity").unwrap();
        assert_eq!(id.eval(3.7), 3.7);
        assert_eq!(
            (id.lower_slope(), id.upper_slope(), id.curvature_bound()),
            (1.0, 1.0, 0.0)
        );
    }

    #[test]
    fn unknown_link_is_config_error() {
        assert!(matches!(
            builtin_link::<f64>("logistic"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn rejects_bad_slopes() {
        let r = LinkFunction::<f64>::new("bad", |x| x, |_| 1.0, |_| 0.0, 0.0, 1.0, 0.0);
        assert!(r.is_err());
        let r = LinkFunction::<f64>::new("bad", |x| x, |_| 1.0, |_| 0.0, 2.0, 1.0, 0.0);
        assert!(r.is_err());
    }

    fn grid() -> impl Iterator<Item = f64> {
        (0..10_000).map(|i| -100.0 + 200.0 * i as f64 / 9_999.0)
    }

    #[test]
    fn derivative_bounds_hold_on_grid() {
        for name in ["identity", "paper"] {
            let f: LinkFunction<f64> = builtin_link(name).unwrap();
            for x in grid() {
                let d1 = f.deriv(x);
                assert!(
                    d1 >= f.lower_slope() && d1 <= f.upper_slope(),
                    "{name} f'({x})={d1}"
                );
                assert!(f.deriv2(x).abs() <= f.curvature_bound(), "{name} f''({x})");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for name in ["identity", "paper"] {
            let f: LinkFunction<f64> = builtin_link(name).unwrap();
            for x in grid() {
                let fd1 = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
                let fd2 = (f.deriv(x + h) - f.deriv(x - h)) / (2.0 * h);
                assert!((f.deriv(x) - fd1).abs() <= 1e-6 * f.deriv(x).abs().max(1.0));
                assert!((f.deriv2(x) - fd2).abs() <= 1e-6 * f.deriv2(x).abs().max(1.0));
            }
        }
    }

    #[test]
    fn link_is_strictly_increasing_on_grid() {
        let f: LinkFunction<f64> = builtin_link("paper").unwrap();
        let vals: Vec<f64> = grid().map(|x| f.eval(x)).collect();
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn inverse_fixed_points() {
        let f: LinkFunction<f64> = builtin_link("paper").unwrap();
        assert_eq!(invert_link(&f, 1.0).unwrap(), 0.0);
        let id: LinkFunction<f64> = builtin_link("identity").unwrap();
        assert!((invert_link(&id, -4.2).unwrap() + 4.2).abs() <= 1e-15);
    }

    #[test]
    fn inverse_round_trip_grid() {
        for name in ["identity", "paper"] {
            let f: LinkFunction<f64> = builtin_link(name).unwrap();
            for x in grid() {
                let y = f.eval(x);
                let z = invert_link(&f, y).unwrap();
                assert!((f.eval(z) - y).abs() <= 1e-10, "{name}: x={x}");
            }
        }
    }

    #[test]
    fn inverse_round_trip_random() {
        let f: LinkFunction<f64> = builtin_link("paper").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let y: f64 = rng.gen_range(-50.0..50.0);
            let z = invert_link(&f, y).unwrap();
            assert!((f.eval(z) - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn inverse_rejects_non_finite() {
        let f: LinkFunction<f64> = builtin_link("paper").unwrap();
        assert!(matches!(invert_link(&f, f64::NAN), Err(Error::Input(_))));
        assert!(matches!(
            invert_link(&f, f64::INFINITY),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn inverse_in_single_precision() {
        let f: LinkFunction<f32> = builtin_link("paper").unwrap();
        let z = invert_link(&f, 7.5f32).unwrap();
        assert!((f.eval(z) - 7.5).abs() <= 1e-5);
    }

    #[test]
    fn dataset_validation() {
        let x = Array2::<f64>::zeros((3, 2));
        assert!(Dataset::new(x.clone(), Array1::zeros(2)).is_err());
        assert!(Dataset::new(Array2::<f64>::zeros((0, 2)), Array1::zeros(0)).is_err());
        let mut bad = x.clone();
        bad[[1, 1]] = f64::NAN;
        assert!(Dataset::new(bad, Array1::zeros(3)).is_err());
        assert!(Dataset::new(x, Array1::zeros(3)).is_ok());
    }

    #[test]
    fn csv_with_and_without_header() {
        let with = "y,x1,x2\n1.5,2,3\n-1,0.5,4e-1\n";
        let without = "1.5,2,3\n-1,0.5,0.4\n";
        let a = Dataset::<f64>::from_csv_str(with).unwrap();
        let b = Dataset::<f64>::from_csv_str(without).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.n(), a.d()), (2, 2));
        assert_eq!(a.response()[1], -1.0);
        assert_eq!(a.design()[[1, 1]], 0.4);
        let again = Dataset::<f64>::from_csv_str(&a.to_csv_string()).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn csv_errors() {
        assert!(Dataset::<f64>::from_csv_str("y,x1\n").is_err());
        assert!(Dataset::<f64>::from_csv_str("1,2\n3,4,5\n").is_err());
        assert!(Dataset::<f64>::from_csv_str("1,abc\n").is_err());
        assert!(Dataset::<f64>::from_csv_str("1\n").is_err());
    }

    #[test]
    fn fit_config_validation() {
        let cfg = FitConfig::<f64>::new(0.1);
        assert!(cfg.validate(3).is_ok());
        let mut c = cfg.clone();
        c.alpha_min = 2.0;
        assert!(c.validate(3).is_err());
        let mut c = cfg.clone();
        c.eta = 1.0;
        assert!(c.validate(3).is_err());
        let c = cfg.with_init(Array1::zeros(2));
        assert!(matches!(c.validate(3), Err(Error::Input(_))));
    }

    #[test]
    fn ground_truth_counts_support() {
        let g = SparsityGroundTruth::new(Array1::from(vec![0.0, 1.5, 0.0, -2.0]));
        assert_eq!(g.support_size, 2);
    }
}
