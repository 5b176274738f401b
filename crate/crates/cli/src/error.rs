use thiserror::Error;

/// Process exit codes. Stable; documented in `--help`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ExitStatus {
    Ok = 0,
    /// Bad flags, unreadable or malformed input.
    Input = 2,
    /// Data below the planned sample size (or δ too large for it).
    Plan = 3,
    DecoderFailure = 4,
    /// A candidate list or net exceeded its cap.
    Overflow = 5,
    /// Numeric trouble or anything else.
    Other = 6,
}

pub const EXIT_CODES_HELP: &str = "\
Exit codes:
  0  success
  2  usage or input error (bad flags, missing or malformed files)
  3  sample-size plan not met (use --force to run anyway)
  4  list decoder failed
  5  candidate list or net overflow (raise --alpha or --candidate-cap, or use --dedup)
  6  numeric or other error";

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    pub fn new(status: ExitStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(ExitStatus::Input, message)
    }
}

impl From<dpmix::Error> for CliError {
    fn from(e: dpmix::Error) -> Self {
        use dpmix::Error as E;
        let status = match &e {
            E::InvalidParameter { .. } | E::InvalidInput(_) | E::Parse { .. } | E::Io(_) => ExitStatus::Input,
            E::InsufficientData { .. } | E::BudgetViolation { .. } => ExitStatus::Plan,
            E::DecoderFailed(_) => ExitStatus::DecoderFailure,
            E::Overflow { .. } => ExitStatus::Overflow,
            E::Numeric(_) | E::Resolution { .. } => ExitStatus::Other,
        };
        Self::new(status, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_distinct_codes() {
        let plan: CliError = dpmix::Error::InsufficientData {
            stage: "learner",
            required: 10,
            available: 1,
        }
        .into();
        assert_eq!(plan.status, ExitStatus::Plan);
        assert!(plan.message.contains("10"));
        let overflow: CliError = dpmix::Error::Overflow {
            what: "net",
            size: 1e9,
            cap: 10,
        }
        .into();
        assert_eq!(overflow.status as u8, 5);
        let failed: CliError = dpmix::Error::DecoderFailed("x".into()).into();
        assert_eq!(failed.status as u8, 4);
    }
}
