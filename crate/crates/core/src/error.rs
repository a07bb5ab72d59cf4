use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("option count {0} outside 2..=5")]
    OptionCount(usize),
    #[error("probability vector has length {got}, expected {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("probability sum deviation: sum is {sum}")]
    SumDeviation { sum: f64 },
    #[error("non-finite probability at index {0}")]
    NonFinite(usize),
    #[error("invalid IFP {id}: {reason}")]
    InvalidIfp { id: String, reason: String },
    #[error("unknown IFP {0}")]
    UnknownIfp(String),
    #[error("forecast for IFP {ifp} on day {day} outside its active window")]
    OutsideWindow { ifp: String, day: String },
    #[error("IFP {0} is not resolved")]
    Unresolved(String),
    #[error("outcome index {outcome} out of range for {options} options")]
    OutcomeRange { outcome: usize, options: usize },
    #[error("ordinal Brier needs an ordered option set")]
    NotOrdinal,
    #[error("empty cohort median table")]
    EmptyCohort,
    #[error("empty sample")]
    EmptySample,
    #[error("zero pooled standard deviation")]
    ZeroPooledSd,
    #[error("series too short: {got} observations, need {need}")]
    SeriesTooShort { need: usize, got: usize },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("model rejected: {0}")]
    ModelRejected(String),
    #[error("IFP {0} has no thresholds")]
    MissingThresholds(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sparsity level {0} outside [0, 1)")]
    SparsityLevel(f64),
    #[error("empty tournament log")]
    EmptyLog,
    #[error("no forecast inputs to combine")]
    NothingToCombine,
    #[error("import: {0}")]
    Import(String),
    #[error("{rejected} of {rows} rows rejected, above the {limit} limit")]
    TooManyRejects { rejected: usize, rows: usize, limit: f64 },
    #[error("I/O: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl Error {
    /// True for errors caused by invalid input or configuration, as opposed
    /// to I/O failures and numerical breakdowns.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io(_)
                | Error::ModelRejected(_)
                | Error::NothingToCombine
                | Error::EmptySample
                | Error::ZeroPooledSd
                | Error::EmptyCohort
        )
    }
}
