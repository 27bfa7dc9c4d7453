use thiserror::Error;

use crate::grid::Dose;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dose {dose} is outside the {j_levels}x{k_levels} grid")]
    OutOfGrid {
        dose: Dose,
        j_levels: usize,
        k_levels: usize,
    },
    #[error("{dlts} DLTs reported for a cohort of {patients}")]
    TooManyDlts { patients: u32, dlts: u32 },
    #[error("cohort must contain at least one patient")]
    EmptyCohort,
    #[error("trial already finished")]
    TrialFinished,
    #[error("toxicity rate undefined at {0}: no patients treated")]
    UndefinedRate(Dose),
    #[error("no dose has been tried yet")]
    NoDosesTried,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("posterior has zero mass on the integration grid (likelihood underflow)")]
    ZeroPosteriorMass,
    #[error("log posterior is not finite at the initial point")]
    NonFiniteInit,
    #[error("maximum likelihood estimate undefined: data contain only DLTs or only non-DLTs")]
    MleUndefined,
    #[error("unknown design id `{id}`; valid ids: {valid}")]
    UnknownDesign { id: String, valid: String },
    #[error("design contract violated: {0}")]
    Contract(String),
    #[error("invalid history: {0}")]
    InvalidHistory(String),
    #[error("{design} on {scenario}, replication {rep}: {source}")]
    Replication {
        design: String,
        scenario: String,
        rep: u64,
        source: Box<Error>,
    },
    #[error("{0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(format!("line {} column {}: {}", e.line(), e.column(), e))
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
