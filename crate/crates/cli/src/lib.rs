//! Harness around `qadv-core`: TOML configuration, the generalization-error
//! experiment with CSV/JSON/SVG outputs, and POVM files.
//!
//! The binary `qadv` is a thin clap front end over this library.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod povm_file;

use thiserror::Error;

/// Failure classes of the command-line tool, each with its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("I/O: {0}")]
    Io(String),
    #[error("did not converge: {0}")]
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::NotConverged(_) => 3,
        }
    }
}

impl From<qadv_core::Error> for CliError {
    fn from(e: qadv_core::Error) -> Self {
        match e {
            qadv_core::Error::NotConverged(m) => CliError::NotConverged(m),
            other => CliError::Validation(other.to_string()),
        }
    }
}

/// Sizes the global rayon pool from `QADV_THREADS` when set.
pub fn init_thread_pool() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QADV_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::Usage(format!("QADV_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage(String::new()).exit_code(), 1);
        assert_eq!(CliError::Io(String::new()).exit_code(), 2);
        assert_eq!(CliError::from(qadv_core::Error::CannotBound).exit_code(), 2);
        assert_eq!(CliError::from(qadv_core::Error::NotConverged("x".into())).exit_code(), 3);
    }
}
