use std::path::PathBuf;

use thiserror::Error;
use vidcurate_core::ManifestError;

/// Offending records listed in a validation failure.
pub const MAX_LISTED: usize = 10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation failed: {context}")]
    Validation { context: String, problems: Vec<String> },
    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("config conflict: {0}")]
    Config(String),
    #[error("service failure on {} clip(s)", .0.len())]
    Service(Vec<String>),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } | CliError::MissingInput(_) => 2,
            CliError::Service(_) => 3,
            CliError::Config(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    pub fn validation(context: impl Into<String>, problems: Vec<String>) -> CliError {
        CliError::Validation { context: context.into(), problems }
    }

    /// Multi-line report: the headline plus up to [`MAX_LISTED`] details.
    pub fn report(&self) -> String {
        let mut out = format!("error: {self}");
        let details = match self {
            CliError::Validation { problems, .. } => problems,
            CliError::Service(items) => items,
            _ => return out,
        };
        for d in details.iter().take(MAX_LISTED) {
            out.push_str("\n  ");
            out.push_str(d);
        }
        if details.len() > MAX_LISTED {
            out.push_str(&format!("\n  ... and {} more", details.len() - MAX_LISTED));
        }
        out
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

pub fn manifest_error(path: &std::path::Path, e: ManifestError) -> CliError {
    let context = format!("manifest {}", path.display());
    match e {
        ManifestError::Validation(problems) => {
            CliError::validation(context, problems.iter().map(|p| p.to_string()).collect())
        }
        ManifestError::Io(e) if e.kind() == std::io::ErrorKind::NotFound => CliError::MissingInput(path.to_path_buf()),
        ManifestError::Io(e) => CliError::Other(format!("{}: {e}", path.display())),
        other => CliError::validation(context, vec![other.to_string()]),
    }
}
