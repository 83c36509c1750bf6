use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KurvError {
    #[error("point {coordinate} = {modulus:.6} lies outside the validity radius {radius}")]
    OutsideRegion {
        coordinate: String,
        modulus: f64,
        radius: f64,
    },

    #[error("unsupported jet order {0} (maximum is 4)")]
    UnsupportedOrder(usize),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(
        "singular metric: minimum eigenvalue {min_eigenvalue:e} below threshold {threshold:e}"
    )]
    SingularMetric { min_eigenvalue: f64, threshold: f64 },

    #[error("zero tangent vector where a direction is required")]
    ZeroVector,

    #[error("curvature value {re:e} + {im:e}i is not real (imaginary residue too large)")]
    NonReal { re: f64, im: f64 },

    #[error("degenerate metric family at k = {k}: {reason}")]
    DegenerateOmega { k: f64, reason: String },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("parameter `{name}` = {value} outside admissible range [{min}, {max}]")]
    ParameterRange {
        name: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, KurvError>;

impl From<std::io::Error> for KurvError {
    fn from(e: std::io::Error) -> Self {
        KurvError::Io(e.to_string())
    }
}
