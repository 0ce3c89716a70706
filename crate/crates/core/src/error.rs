use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported step {step}: bracket length is limited to 4")]
    UnsupportedStep { step: usize },
    #[error("invalid group spec: {0}")]
    InvalidSpec(String),
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
    #[error("gauge `{gauge}` is not defined on group `{group}`")]
    GaugeGroupMismatch { gauge: String, group: String },
    #[error("root bracketing failed after {0} doublings")]
    RootBracketFailure(usize),
    #[error("finite-difference step fell below 1e-8")]
    StepUnderflow,
    #[error("gauge lacks the horizontal symmetry required: {0}")]
    SymmetryViolation(String),
    #[error("field is identically zero")]
    ZeroField,
    #[error("mollifier mass {0} differs from 1 by more than 1%")]
    Normalization(f64),
    #[error("balls {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
