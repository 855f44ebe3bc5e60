use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("variable index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("vector length {got} does not match dimension, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("division by zero")]
    DivisionByZero,

    #[error("evaluation hit a pole or left the real domain")]
    Pole,

    #[error("unbound symbol or variable: {0}")]
    Unbound(String),

    #[error("unsupported exponent: {0}")]
    UnsupportedExponent(String),

    #[error("expected a polynomial expression, found quotient: {0}")]
    NotPolynomial(String),

    #[error("expression must not depend on u or its derivatives: {0}")]
    UDependent(String),

    #[error("coefficient xi^{0} of the vector field depends on u")]
    XiDependsOnU(usize),

    #[error("vector field is not conformal Killing: residual {residual} at ({alpha},{beta})")]
    NotConformalKilling {
        alpha: usize,
        beta: usize,
        residual: String,
    },

    #[error("nonlinearity of the reduced class must not contain derivative variables")]
    ReducedClassViolation,

    #[error("eta is not of the form a(x)*u + b(x)")]
    EtaNotLinear,

    #[error("power nonlinearity requires exponent k != 0, 1")]
    InvalidPowerExponent,

    #[error("conformal condition failed: residual {residual} at index pair ({alpha},{beta})")]
    ConformalResidual {
        alpha: usize,
        beta: usize,
        residual: String,
    },

    #[error("conformal factor is not positive at sample point {point}: lambda = {value}")]
    NonPositiveFactor { point: String, value: String },

    #[error("outside chart: denominator vanishes at sample point {0}")]
    OutsideChart(String),

    #[error("transform is not invertible on the working chart and no inverse was supplied")]
    NotInvertible,

    #[error("A(x) must not be identically zero")]
    ZeroAmplitude,

    #[error("duplicate binding for {0}")]
    DuplicateBinding(String),

    #[error("rank-one check expects exactly 3 expressions, got {0}")]
    WrongArity(usize),

    #[error("invalid epsilon parameter for realization: {0}")]
    InvalidEpsilon(u32),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
