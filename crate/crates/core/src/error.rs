use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("resolution too coarse: spacing {spacing} vs smallest feature {feature}")]
    ResolutionTooCoarse { spacing: f64, feature: f64 },

    #[error("invalid time {0}: must be positive")]
    InvalidTime(f64),

    #[error("outside validity region: t = {t} < {lower}")]
    OutsideValidity { t: f64, lower: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("oracle scale exceeded: {cells} occupied cells > {limit}")]
    OracleScaleExceeded { cells: usize, limit: usize },

    #[error("engine {engine} does not support {what}")]
    Unsupported { engine: &'static str, what: String },

    #[error("engine too noisy for requested order {order}")]
    TooNoisy { order: u32 },

    #[error("finite-difference step underflows at t = {0}")]
    StepUnderflow(f64),

    #[error("unknown inequality case id: {0}")]
    UnknownCase(String),

    #[error("domain file: {0}")]
    DomainFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
