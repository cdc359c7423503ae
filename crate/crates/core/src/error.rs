use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("topology is not radial: branch '{branch}' closes a loop at bus '{bus}'")]
    CycleDetected { branch: String, bus: String },
    #[error("{kind} '{owner}' references unknown bus '{bus}'")]
    DanglingReference { kind: String, owner: String, bus: String },
    #[error("{owner}: phase mismatch ({detail})")]
    PhaseMismatch { owner: String, detail: String },
    #[error("{owner}: `{field}` must be positive")]
    NonPositiveRating { owner: String, field: String },
    #[error("{owner}: invalid value for `{field}` ({detail})")]
    InvalidValue { owner: String, field: String, detail: String },
    #[error("bus '{bus}' is not connected to the source")]
    Disconnected { bus: String },
    #[error("branch '{branch}' joins buses with different base voltages")]
    BaseVoltageMismatch { branch: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PowerFlowError {
    #[error("line '{line}' has a singular (zero) impedance matrix")]
    SingularSegment { line: String },
    #[error("non-finite injection at bus '{bus}'")]
    NonFiniteInjection { bus: String },
    #[error("solution did not converge")]
    UnconvergedSolution,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InverterError {
    #[error("a zero power factor setting is not allowed")]
    ZeroPowerFactor,
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("invalid parameter `{name}`: {detail}")]
    InvalidParameter { name: String, detail: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("profile '{name}': {detail}")]
    Invalid { name: String, detail: String },
    #[error("profile '{name}' covers {have} samples, {need} required")]
    TooShort { name: String, have: usize, need: usize },
    #[error("no profile named '{0}'")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error(transparent)]
    Inverter(#[from] InverterError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("sweep list is empty")]
    EmptySweep,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("runs cover different durations ({with} vs {baseline} timesteps)")]
    DurationMismatch { with: usize, baseline: usize },
    #[error("device '{0}' has no switching operations in the baseline run")]
    UndefinedBaseline(String),
    #[error("no regulators to aggregate")]
    EmptyList,
    #[error("unknown device '{0}'")]
    UnknownDevice(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarmonicsError {
    #[error("fundamental solution is not converged")]
    UnconvergedFundamental,
    #[error("harmonic order {0} is not in the spectrum")]
    UnknownOrder(u32),
    #[error("order 1 missing for element '{0}'")]
    MissingFundamental(String),
    #[error("element '{0}' is not monitored")]
    UnknownElement(String),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("missing baseline bundle in {}", .0.display())]
    MissingBaseline(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            IoError::MissingFile(path)
        } else {
            IoError::Io { path, source }
        }
    }

    pub fn parse(what: impl Into<String>, message: impl Into<String>) -> Self {
        IoError::Parse {
            what: what.into(),
            message: message.into(),
        }
    }
}

/// Crate-wide error used at the orchestration and file boundaries.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Harmonics(#[from] HarmonicsError),
}

impl From<NetworkError> for Error {
    fn from(e: NetworkError) -> Self {
        Error::Sim(SimError::Network(e))
    }
}

impl From<ProfileError> for Error {
    fn from(e: ProfileError) -> Self {
        Error::Sim(SimError::Profile(e))
    }
}

impl From<InverterError> for Error {
    fn from(e: InverterError) -> Self {
        Error::Sim(SimError::Inverter(e))
    }
}
