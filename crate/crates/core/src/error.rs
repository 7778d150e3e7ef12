use std::fmt;

use thiserror::Error;

/// A single violated parameter constraint, e.g. `model.c_vol: c_vol > 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Dotted path of the offending field (`model.c_vol`, `jumps.eta1`).
    pub field: String,
    /// The rule that failed, written as the constraint that should hold.
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join(.0))]
    InvalidParams(Vec<Violation>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Poisson truncation needs order {required}, above the hard cap {cap} (lambda*t = {mean})")]
    TruncationCap {
        required: usize,
        cap: usize,
        mean: f64,
    },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}, tolerance {tolerance:e}")]
    QuadratureNotConverged {
        estimate: f64,
        error: f64,
        tolerance: f64,
    },

    #[error("u-integral tail cannot be certified: decay rate {rate} is not safely positive")]
    UncertifiableTail { rate: f64 },

    #[error("sample set is degenerate (standard deviation {std_dev:e}); use an atom representation")]
    DegenerateSamples { std_dev: f64 },

    #[error("too few samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("negative variance {value:e} at step {step}; use cir_full_truncation or cir_exact")]
    NegativeVariance { value: f64, step: usize },

    #[error("scheme {scheme} is not compatible with the {model} model")]
    SchemeMismatch {
        scheme: &'static str,
        model: &'static str,
    },

    #[error("fit window {0}")]
    InvalidWindow(String),

    #[error("asymptotic regime not reached: r^2 = {r_squared:.4} < {threshold}")]
    PoorFit { r_squared: f64, threshold: f64 },

    #[error("knife-edge regime: |{jump_exponent} - {diffusive_exponent}| < {guard}; exponents not separable at desk scale")]
    Indeterminate {
        jump_exponent: f64,
        diffusive_exponent: f64,
        guard: f64,
    },

    #[error("model has no jump component")]
    MissingJumps,
}

impl Error {
    /// Name of the module family that raised the error, for diagnostics.
    pub fn module(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) | Error::MissingJumps => "models",
            Error::TruncationCap { .. } => "jumplaw",
            Error::QuadratureNotConverged { .. } | Error::UncertifiableTail { .. } => "semianalytic",
            Error::DegenerateSamples { .. }
            | Error::TooFewSamples { .. }
            | Error::NegativeVariance { .. }
            | Error::SchemeMismatch { .. } => "mc",
            Error::GridMismatch(_) => "grid",
            Error::InvalidWindow(_) | Error::PoorFit { .. } => "asymptotics",
            Error::Indeterminate { .. } => "verify",
            Error::InvalidArgument(_) => "argument",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
