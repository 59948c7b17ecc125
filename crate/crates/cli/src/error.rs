//! CLI error type and the exit-code contract: 0 = identities within
//! tolerance, 2 = identity violation, 1 = input/configuration error.

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error: {message}")]
    Schema { message: String },
    #[error("unsupported schema_version {found} (this build reads version 1)")]
    Version { found: i64 },
    #[error(transparent)]
    Core(#[from] retrodiction::Error),
    #[error("cannot plot an empty measure")]
    EmptyMeasure,
    #[error("verification failed: {message}")]
    Verify { message: String },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "IoError",
            CliError::Parse { .. } => "ParseError",
            CliError::Schema { .. } => "SchemaError",
            CliError::Version { .. } => "VersionError",
            CliError::Core(_) => "ScenarioError",
            CliError::EmptyMeasure => "EmptyMeasure",
            CliError::Verify { .. } => "VerifyError",
        }
    }

    /// JSON error object printed to stderr on failure.
    pub fn to_json(&self) -> String {
        format!(
            "{{\"error\":{{\"type\":\"{}\",\"message\":\"{}\"}}}}",
            self.kind(),
            escape_json(&self.to_string())
        )
    }
}

pub fn escape_json(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 8);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

pub fn io_err(path: &std::path::Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub type CliResult<T> = Result<T, CliError>;
