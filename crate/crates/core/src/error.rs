use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid configuration: unsupported orders, bad parameters, bad ids.
    #[error("configuration error: {0}")]
    Config(String),

    /// An elementary function was applied outside its domain.
    #[error("domain error in `{op}`: argument constant term {value:e}")]
    Domain { op: &'static str, value: f64 },

    /// A base point lies outside the coordinate chart of a metric.
    #[error("point {point:?} lies outside the chart of `{metric}`")]
    OutsideChart { metric: String, point: Vec<f64> },

    /// Ray/boundary computations on a convex domain failed.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// The fundamental tensor failed positive definiteness (or another
    /// Minkowski-functional requirement) at a sample.
    #[error("metric `{metric}` invalid at x={x:?}, y={y:?}: {reason}")]
    MetricValidity {
        metric: String,
        x: Vec<f64>,
        y: Vec<f64>,
        reason: String,
    },

    /// ODE integration failed (step-size collapse or non-finite state).
    #[error("integration error at t={t}: {reason}")]
    Integration { t: f64, reason: String },

    /// A geodesic left the chart before reaching the requested parameter.
    #[error("geodesic left the chart at t={exit_t} before reaching t={requested}")]
    Range { exit_t: f64, requested: f64 },

    /// Two independent numerical routes disagree beyond their error budget.
    #[error("numerical integrity error: {0}")]
    NumericalIntegrity(String),

    /// A stated precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A finite-difference or variational oracle could not produce a value.
    #[error("oracle failure: {0}")]
    OracleFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
