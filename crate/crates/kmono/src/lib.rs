//! Least-squares estimation of discrete probability mass functions under
//! k-monotony shape constraints.
//!
//! A sequence `f` on the nonnegative integers is *k-monotone* when
//! `(-1)^k Δ^k f(i) >= 0` for every `i` (`k = 1` is nonincreasing, `k = 2`
//! convex). Every summable k-monotone sequence is a unique nonnegative
//! mixture of discrete spline atoms, which turns shape-constrained least
//! squares into a nonnegative (or simplex-constrained) quadratic program
//! over mixture weights. This crate provides:
//!
//! - the spline basis, its masses, and the mixture decomposition ([`spline`]);
//! - a support-reduction solver for the truncated projection problem
//!   ([`solver`]);
//! - finite certificates that a truncated solution is the global projection
//!   ([`stopping`]);
//! - a top-level estimator driver producing either the probability-constrained
//!   projection or the cone projection ([`estimator`]);
//! - reference target distributions, loss functions, and a seeded,
//!   reproducible Monte Carlo harness ([`dist`], [`metrics`], [`sim`]).
//!
//! The `kmono` binary exposes all of this on the command line.

#![forbid(unsafe_code)]

pub mod dist;
pub mod empirical;
pub mod estimator;
pub mod metrics;
pub mod seq;
pub mod sim;
pub mod solver;
pub mod spline;
pub mod stopping;

pub use empirical::{CountTable, InputFormat};
pub use estimator::{fit, EstimateResult, FitOptions};
pub use seq::{DiscreteSeq, ProbSeq};
pub use solver::Mode;
pub use spline::SplineMixture;
pub use stopping::StopReport;

use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("difference order k must be at least 1")]
    ZeroOrder,

    #[error("not a probability sequence: {0}")]
    NotProbability(String),

    #[error("sequence is not {k}-monotone: signed difference {value:.3e} at index {index}")]
    NotKMonotone { k: usize, index: usize, value: f64 },

    #[error("empty input: at least one observation is required")]
    EmptyInput,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid distribution spec {spec:?}: {msg}")]
    BadDistSpec { spec: String, msg: String },

    #[error("gram matrix numerically singular on support {support:?}")]
    SingularGram { support: Vec<usize> },

    #[error("solver exceeded {cap} outer iterations at truncation level {level} (tolerance misconfiguration?)")]
    IterationCap { cap: usize, level: usize },

    #[error("short stopping criterion requires k in {{3, 4}}, got k = {0}")]
    CriterionOrder(usize),

    #[error("truncation schedule exceeded cap {cap}; criterion still failing at L = {last_level}")]
    TruncationCap { cap: usize, last_level: usize },

    #[error("stopping criterion not satisfied at L = {level}: {report}")]
    CriterionFailed {
        level: usize,
        report: Box<StopReport>,
    },

    #[error("convex-mode consistency check failed: |beta| = {0:.3e} exceeds tolerance")]
    ConvexBeta(f64),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl Error {
    /// Wraps an I/O error with the path it concerns.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
