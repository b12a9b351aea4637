use seqwarp_expr::{FieldError, ParseError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("chart `{chart}`: {message}")]
    InvalidChart { chart: String, message: String },
    #[error("parsing `{src}` in {context}: {source}")]
    Parse {
        context: String,
        src: String,
        #[source]
        source: ParseError,
    },
    #[error("{context}: {source}")]
    Field {
        context: String,
        #[source]
        source: FieldError,
    },
    #[error("metric of `{chart}` is singular at {point:?} (|det| = {det:e} below floor {floor:e})")]
    SingularMetric {
        chart: String,
        point: Vec<f64>,
        det: f64,
        floor: f64,
    },
    #[error("point {point:?} lies outside the domain of chart `{chart}`")]
    OutOfDomain { chart: String, point: Vec<f64> },
    #[error("warping function {name} = {value} is not positive at {point:?}")]
    NonPositiveWarping {
        name: &'static str,
        value: f64,
        point: Vec<f64>,
    },
    #[error("coordinate `{0}` is declared by more than one factor")]
    CoordinateCollision(String),
    #[error("dimension {0} is too small; the pseudo-projective tensor needs n > 2")]
    DimensionTooSmall(usize),
    #[error("pseudo-projective parameters must be non-zero (alpha = {alpha}, beta = {beta})")]
    ZeroParameter { alpha: f64, beta: f64 },
    #[error("invalid case {case} for {formula}")]
    InvalidCase { formula: &'static str, case: usize },
    #[error("at point {point:?}: {source}")]
    AtPoint {
        point: Vec<f64>,
        #[source]
        source: Box<GeometryError>,
    },
    #[error("{0}")]
    Invalid(String),
}

impl GeometryError {
    pub(crate) fn field(context: impl Into<String>, source: FieldError) -> Self {
        GeometryError::Field {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;
