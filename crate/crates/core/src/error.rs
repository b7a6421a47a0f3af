use thiserror::Error;

/// Errors raised by the library. Planning and execution failures are
/// reported in their result types, not here.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid depth {0} (must be > 0)")]
    InvalidDepth(f64),
    #[error("pixel ({u}, {v}) outside {width}x{height} raster")]
    OutOfBounds { u: f64, v: f64, width: u32, height: u32 },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("hull is a triangle")]
    Triangle,
    #[error("hinged articulation is missing its axis or radius")]
    MissingAxis,
    #[error("waypoint count {0} < 2")]
    BadCount(usize),
    #[error("insufficient depth: {valid} valid masked pixels, need {required}")]
    InsufficientDepth { valid: usize, required: usize },
    #[error("degenerate plane fit: {0}")]
    DegeneratePlane(String),
    #[error("degenerate quadrilateral: {0}")]
    DegenerateQuad(String),
    #[error("insufficient points: {got}, need {required}")]
    InsufficientPoints { got: usize, required: usize },
    #[error("joint limit violation: {joint} = {value} outside [{lo}, {hi}]")]
    LimitViolation { joint: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("motion plan is empty")]
    EmptyPlan,
    #[error("no contact after {0} correction steps")]
    NoContact(usize),
    #[error("heatmap is empty")]
    EmptyHeatmap,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Schema(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDepth(_) => "InvalidDepth",
            Error::OutOfBounds { .. } => "OutOfBounds",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::Triangle => "Triangle",
            Error::MissingAxis => "MissingAxis",
            Error::BadCount(_) => "BadCount",
            Error::InsufficientDepth { .. } => "InsufficientDepth",
            Error::DegeneratePlane(_) => "DegeneratePlane",
            Error::DegenerateQuad(_) => "DegenerateQuad",
            Error::InsufficientPoints { .. } => "InsufficientPoints",
            Error::LimitViolation { .. } => "LimitViolation",
            Error::EmptyPlan => "EmptyPlan",
            Error::NoContact(_) => "NoContact",
            Error::EmptyHeatmap => "EmptyHeatmap",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::Io { .. } => "Io",
            Error::Parse(_) => "Parse",
            Error::Schema(_) => "Schema",
        }
    }

    /// Process exit code: 1 for I/O and parse failures, 2 for violated
    /// preconditions.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Parse(_) | Error::Schema(_) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
