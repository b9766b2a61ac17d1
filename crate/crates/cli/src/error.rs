//! Harness error type and its mapping onto process exit codes.

use hurst_sense_core::CoreError;

/// Anything that can go wrong between argument parsing and report output.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad invocation or configuration: unknown experiment, schema violation,
    /// missing required field, unresolvable name.
    #[error("{0}")]
    Usage(String),

    /// Propagated library error; numerical failures map to exit code 3,
    /// validation failures to 2.
    #[error(transparent)]
    Core(#[from] CoreError),

    /// File system trouble (config unreadable, output not writable).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Exit code for a usage error.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for a numerical failure.
pub const EXIT_NUMERICAL: i32 = 3;

impl CliError {
    /// The process exit code this error maps to.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                CoreError::Numerical { .. } | CoreError::Diverged { .. } => EXIT_NUMERICAL,
                _ => EXIT_USAGE,
            },
        }
    }

    /// Whether a partial report (metadata plus error note) should still be
    /// emitted; numerical failures happen mid-computation, so the run context
    /// is worth keeping.
    pub fn emit_partial(&self) -> bool {
        self.exit_code() == EXIT_NUMERICAL
    }
}
