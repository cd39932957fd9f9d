use spacelab::GeomError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_HYPOTHESES: i32 = 2;
pub const EXIT_NONCONVERGENT: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Output(_) => EXIT_FAILED,
            CliError::Geom(e) => match e {
                GeomError::Expr(_) | GeomError::Invalid(_) => EXIT_CONFIG,
                GeomError::Linear(_) => EXIT_NONCONVERGENT,
                _ => EXIT_HYPOTHESES,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_CONFIG => "config_error",
            EXIT_HYPOTHESES => "hypotheses_violated",
            EXIT_NONCONVERGENT => "nonconvergent",
            _ => "failed",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(CliError::Config("x".into()).exit_code(), EXIT_CONFIG);
        assert_eq!(CliError::Geom(GeomError::Invalid("x".into())).exit_code(), EXIT_CONFIG);
        assert_eq!(CliError::Geom(GeomError::HasBoundary).exit_code(), EXIT_HYPOTHESES);
        assert_eq!(CliError::Geom(GeomError::Linear("x".into())).exit_code(), EXIT_NONCONVERGENT);
        assert_eq!(CliError::Geom(GeomError::HasBoundary).kind(), "hypotheses_violated");
    }
}
