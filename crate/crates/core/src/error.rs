use thiserror::Error;

/// Errors raised by estimation, inference and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or inconsistent input (dimension mismatch, non-finite data, bad index).
    #[error("invalid input: {0}")]
    Input(String),

    /// Invalid configuration (unknown link name, parameter out of range).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Generic numerical failure (non-finite intermediate, failed factorization).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The line search hit its cap without satisfying the acceptance rule.
    #[error("line search exhausted after {linesearch_steps} expansions at iteration {iteration}")]
    LineSearchExhausted {
        iteration: usize,
        linesearch_steps: usize,
        /// Iterate reached before the failing step.
        iterate: Vec<f64>,
    },

    /// The decorrelation LP has no feasible point for the given tuning parameter.
    #[error("Dantzig selector infeasible at rho={rho}; increase rho")]
    DantzigInfeasible { rho: f64 },

    #[error("degenerate score variance")]
    DegenerateVariance,

    #[error("singular Wald denominator ({0:e})")]
    SingularDenominator(f64),

    /// A brute-force diagnostic was asked to enumerate an intractable instance.
    #[error("d too large for exhaustive enumeration (d={d}, max {max})")]
    TooLarge { d: usize, max: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
