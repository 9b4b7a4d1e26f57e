use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid forecast: {0}")]
    InvalidForecast(String),

    #[error("invalid level {0}: must lie strictly inside (0, 1)")]
    InvalidLevel(f64),

    #[error("invalid energy exponent {0}: must lie in (0, 2]")]
    InvalidBeta(f64),

    #[error("invalid weight scale {0}: must be positive and finite")]
    InvalidScale(f64),

    #[error("forecast not convertible: {0}")]
    NotConvertible(String),

    #[error("observation {y} lies outside the histogram support [{lo}, {hi}]")]
    OutsideSupport { y: f64, lo: f64, hi: f64 },

    #[error("empty batch")]
    EmptyBatch,

    #[error("unknown metric `{name}`; valid identifiers: {valid}")]
    UnknownMetric { name: String, valid: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown forecast type `{form}`")]
    UnknownForm { line: usize, form: String },

    #[error("line {line}: record carries more than one forecast form")]
    AmbiguousForm { line: usize },

    #[error("line {line}: duplicate run key {key} (first seen on line {first_line})")]
    DuplicateKey {
        key: String,
        first_line: usize,
        line: usize,
    },

    #[error("line {line}: invalid value `{value}`")]
    InvalidValue { line: usize, value: String },

    #[error("bad header `{0}`; expected `model,dataset,fold,metric,value`")]
    BadHeader(String),

    #[error("record {index}: {source}")]
    AtRecord {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("models not comparable: {0}")]
    NotComparable(String),

    #[error("no informative datasets: every dataset has identical scores across models")]
    NoInformativeDatasets,

    #[error("invalid scenario: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// `true` for failures caused by malformed input files or flags, as
    /// opposed to inputs that parse but cannot be scored or ranked.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::AtRecord { source, .. } => source.is_input_error(),
            Error::OutsideSupport { .. }
            | Error::EmptyBatch
            | Error::NotComparable(_)
            | Error::NoInformativeDatasets
            | Error::InvalidScale(_)
            | Error::NotConvertible(_) => false,
            _ => true,
        }
    }

    pub(crate) fn at_record(self, index: usize) -> Error {
        Error::AtRecord {
            index,
            source: Box::new(self),
        }
    }
}
