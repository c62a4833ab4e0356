use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index {index} outside explicit window [{lo}, {hi}]")]
    OutOfRange { index: i64, lo: i64, hi: i64 },

    #[error("coefficient {value} is not inside the unit disk")]
    NotInDisk { value: f64 },

    #[error("boundary phase must be unimodular, got modulus {modulus}")]
    NotUnimodular { modulus: f64 },

    #[error("|alpha| = 1 makes the transfer matrix singular")]
    SingularCoefficient,

    #[error("spectral parameter z = 0 is not allowed here")]
    ZeroSpectralParameter,

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("window [{n_min}, {n_max}] is not usable: {reason}")]
    BadWindow { n_min: i64, n_max: i64, reason: String },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("eigen-decomposition residual {residual:e} exceeds tolerance {tolerance:e}")]
    EigenResidual { residual: f64, tolerance: f64 },

    #[error("banded solve hit a zero pivot at row {row}")]
    SingularSystem { row: usize },

    #[error("track too short: need index {needed}, have [{lo}, {hi}]")]
    NeedsExtension { needed: i64, lo: i64, hi: i64 },

    #[error("scale equation has no solution below x = {x_max} (product stayed at {product:e})")]
    ScaleUnbounded { x_max: f64, product: f64 },

    #[error("{0} is only supported for constant sources")]
    Unsupported(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
