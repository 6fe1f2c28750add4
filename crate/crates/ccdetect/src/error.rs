//! Command failures, their exit codes and the one-line stderr form.

use std::fmt;

use ccdetect_core::features::FeatureError;
use ccdetect_core::localization::LocalizationError;
use ccdetect_core::simulator::SimError;
use ccdetect_core::spectra::SpectraError;
use ccdetect_core::DetectionError;
use serde::Serialize;

use crate::config::ConfigError;
use crate::formats::LoadError;

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_FORMAT: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub error: &'static str,
    pub exit_code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(error: &'static str, exit_code: i32, message: impl fmt::Display) -> Self {
        Failure {
            error,
            exit_code,
            message: message.to_string(),
        }
    }

    /// Single-line JSON for stderr.
    pub fn line(&self) -> String {
        serde_json::to_string(self).expect("plain struct")
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.error, self.message)
    }
}

impl From<SpectraError> for Failure {
    fn from(e: SpectraError) -> Self {
        let (kind, code) = match &e {
            SpectraError::NoFailingTests => ("no_failing_tests", EXIT_PRECONDITION),
            SpectraError::UnknownStatement { .. } => ("unknown_statement", EXIT_FORMAT),
            SpectraError::DuplicateTestId(_) => ("duplicate_test_id", EXIT_FORMAT),
            SpectraError::NoFaults => ("no_faults", EXIT_FORMAT),
            _ => ("invalid_run", EXIT_FORMAT),
        };
        Failure::new(kind, code, e)
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::MalformedRecord { .. } => Failure::new("malformed_record", EXIT_FORMAT, e),
            LoadError::Io { .. } => Failure::new("io", EXIT_FORMAT, e),
            LoadError::Spectra(s) => s.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Invalid(_) => Failure::new("invalid_params", EXIT_INFEASIBLE, e),
            ConfigError::Syntax { .. } | ConfigError::Io { .. } => Failure::new("config", EXIT_FORMAT, e),
        }
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::InvalidCombo(_) | FeatureError::InvalidFraction(_) => {
                Failure::new("invalid_params", EXIT_INFEASIBLE, e)
            }
            _ => Failure::new("features", EXIT_PRECONDITION, e),
        }
    }
}

impl From<DetectionError> for Failure {
    fn from(e: DetectionError) -> Self {
        match e {
            DetectionError::NoFailingTests => Failure::new("no_failing_tests", EXIT_PRECONDITION, e),
            DetectionError::InsufficientPassing { .. } => Failure::new("insufficient_passing", EXIT_PRECONDITION, e),
            DetectionError::InvalidParams(_) => Failure::new("invalid_params", EXIT_INFEASIBLE, e),
            DetectionError::Feature(f) => f.into(),
            DetectionError::ChunksNotPartition(_) | DetectionError::Forest(_) => {
                Failure::new("detection", EXIT_OTHER, e)
            }
        }
    }
}

impl From<LocalizationError> for Failure {
    fn from(e: LocalizationError) -> Self {
        match e {
            LocalizationError::NoFailingTests => Failure::new("no_failing_tests", EXIT_PRECONDITION, e),
            LocalizationError::NoFaults => Failure::new("no_faults", EXIT_PRECONDITION, e),
            _ => Failure::new("localization", EXIT_OTHER, e),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InfeasibleParams(_) => Failure::new("infeasible_params", EXIT_INFEASIBLE, e),
            SimError::RunMismatch(_) => Failure::new("run_mismatch", EXIT_OTHER, e),
        }
    }
}
