use gbcs_core::GbcsError;

pub const USAGE: u8 = 1;
pub const PARSE: u8 = 2;
pub const NUMERIC: u8 = 3;
pub const INVARIANT: u8 = 4;

/// A message paired with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: USAGE,
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Failure {
            code: PARSE,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Failure {
            code: NUMERIC,
            message: message.into(),
        }
    }

    pub fn invariant(message: impl Into<String>) -> Self {
        Failure {
            code: INVARIANT,
            message: message.into(),
        }
    }
}

impl From<GbcsError> for Failure {
    fn from(e: GbcsError) -> Self {
        let code = match &e {
            GbcsError::Parse { .. } => PARSE,
            GbcsError::InvalidArgument(_) | GbcsError::IndexOutOfRange { .. } => USAGE,
            GbcsError::Consistency(_) => PARSE,
            GbcsError::Invariant(_) => INVARIANT,
            _ => NUMERIC,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}
