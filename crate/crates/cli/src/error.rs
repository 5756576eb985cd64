use std::path::PathBuf;

use kappa_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error(transparent)]
    Core(#[from] Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 0 success, 1 input error, 2 degenerate symbol, 3 divergence,
    /// 4 internal tolerance failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                Error::Degenerate { .. } | Error::Singular { .. } => 2,
                Error::Divergence { .. } => 3,
                Error::Tolerance { .. } => 4,
                _ => 1,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        let deg = CliError::from(Error::Degenerate { lambda: 0.0, argmin: vec![] });
        let div = CliError::from(Error::Divergence { reason: String::new(), factors: vec![] });
        let tol = CliError::from(Error::Tolerance { what: "x".into(), value: 1.0, limit: 0.0 });
        assert_eq!(deg.exit_code(), 2);
        assert_eq!(div.exit_code(), 3);
        assert_eq!(tol.exit_code(), 4);
        assert_eq!(CliError::from(Error::Domain(String::new())).exit_code(), 1);
        assert_eq!(CliError::Input(String::new()).exit_code(), 1);
    }
}
