use std::fmt;
use std::process::ExitCode;

use megastable::analysis::AnalysisError;
use megastable::dde::DdeError;
use megastable::experiments::ExperimentError;
use megastable::models::ParamError;

/// Failure of a subcommand, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or unusable output location (exit 2).
    Config(String),
    /// The computation itself failed (exit 1).
    Numerical(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Numerical(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DdeError> for CliError {
    fn from(e: DdeError) -> Self {
        match e {
            DdeError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Params(p) => p.into(),
            AnalysisError::Dde(d) => d.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Invalid(_) | ExperimentError::UnknownOrbit(_) => {
                CliError::Config(e.to_string())
            }
            ExperimentError::Params(p) => p.into(),
            ExperimentError::Dde(d) => d.into(),
            ExperimentError::Analysis(a) => a.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("writing output: {e}"))
    }
}
