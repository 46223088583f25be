use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rotation angle {0} is too close to pi for a stable logarithm")]
    AngleNearPi(f64),

    #[error("state is outside the chart domain: {0}")]
    OutOfChart(String),

    #[error("affine matrix is singular or ill-conditioned (condition number {0:e})")]
    SingularAffine(f64),

    #[error("innovation covariance is not invertible (condition number {0:e})")]
    SingularInnovation(f64),

    #[error("covariance block is not invertible")]
    SingularCovariance,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("feature index {index} out of range for {count} features")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("degenerate plane: distance {0} is below the minimum")]
    DegeneratePlane(f64),

    #[error("degenerate observation: {0}")]
    DegenerateObservation(String),

    #[error("variant `{variant}` is not supported for the {app} application")]
    VariantUnsupported { variant: String, app: String },

    #[error("infeasible environment: {0}")]
    InfeasibleSpec(String),

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
