use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid period matrix: {0}")]
    InvalidPeriodMatrix(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid characteristic: {0}")]
    InvalidCharacteristic(String),
    #[error("theta series truncated at radius {radius} has relative tail bound {bound:e}")]
    TruncationInsufficient { radius: usize, bound: f64 },
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("unsupported jet: {0}")]
    UnsupportedJet(String),
    #[error("numerical rank is ambiguous: singular value ratio {ratio:e} within a factor 10 of {tol:e}")]
    RankAmbiguous { ratio: f64, tol: f64 },
    #[error("solver did not converge: {0}")]
    NonConvergent(String),
    #[error("lines coincide")]
    CoincidentLines,
    #[error("calibration samples disagree: {0}")]
    CalibrationInconsistent(String),
    #[error("search budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("profile is not classified: {0}")]
    UnclassifiedProfile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
