use std::io;
use std::path::PathBuf;

use augopf_core::case::CaseError;
use augopf_core::dataset::DatasetError;
use augopf_core::inference::PredictError;
use augopf_core::metrics::MetricError;
use augopf_core::nn::{NnError, TrainError};
use augopf_core::powerflow::PowerFlowError;

use crate::format::FormatError;

/// Failure classes with distinct process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: FormatError },
    #[error("case: {0}")]
    Case(#[from] CaseError),
    #[error("invalid case:\n{0}")]
    InvalidCase(String),
    #[error("data: {0}")]
    Data(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Network(#[from] PowerFlowError),
    #[error(transparent)]
    Model(#[from] NnError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("training: {0}")]
    Train(#[from] TrainError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Dataset(
                DatasetError::EmptyProfile
                | DatasetError::NonPositiveCurve { .. }
                | DatasetError::BadJitter(_)
                | DatasetError::NoInitialPoints
                | DatasetError::EmptyRatio
                | DatasetError::EmptySplit { .. },
            ) => ErrorClass::Config,
            Error::Train(_) | Error::Numerical(_) => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
