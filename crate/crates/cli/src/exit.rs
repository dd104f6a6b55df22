use std::fmt;
use std::process::ExitCode;

/// Failure with its process exit code: 1 for domain violations, 2 for usage
/// and parse errors.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl Exit {
    pub const DOMAIN: u8 = 1;
    pub const USAGE: u8 = 2;

    pub fn domain(message: impl Into<String>) -> Self {
        Self {
            code: Self::DOMAIN,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: Self::USAGE,
            message: message.into(),
        }
    }

    /// Domain exit with no message, for results already reported on stdout.
    pub fn silent_domain() -> Self {
        Self::domain(String::new())
    }

    pub fn code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn read(path: &std::path::Path) -> Result<Vec<u8>, Exit> {
    std::fs::read(path).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))
}

pub fn write(path: &std::path::Path, bytes: &[u8]) -> Result<(), Exit> {
    std::fs::write(path, bytes).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))
}
