use std::path::PathBuf;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("fit did not converge after {n_iter} iterations")]
    NotConverged { n_iter: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] dlcz_core::ModelError),
    #[error(transparent)]
    Trajectory(#[from] dlcz_core::trajectories::TrajectoryError),
    #[error(transparent)]
    Superradiance(#[from] dlcz_core::superradiance::SuperradianceError),
    #[error(transparent)]
    Fit(#[from] dlcz_core::fitting::FitError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::NotConverged { .. } => 2,
            CliError::Io { .. } => 3,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
