use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VERIFICATION_FAILED: i32 = 1;
    pub const INPUT_ERROR: i32 = 2;
    pub const BUDGET_REFUSED: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}: parse error at line {line}, column {column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{origin}: field `{field}`: {message}")]
    Field {
        origin: String,
        field: String,
        message: String,
    },
    #[error("{origin}: probabilities sum to {total}, not 1")]
    Mass { origin: String, total: f64 },
    #[error("{origin}: {message}")]
    Shape { origin: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(
        "refusing to run: about {estimated} evaluations exceed the budget of {budget} (raise --budget or lower --grid)"
    )]
    Budget { estimated: u128, budget: u128 },
    #[error("computation failed: {0}")]
    Numeric(canonical_region::Error),
}

impl CliError {
    /// Short machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Field { .. } => "field",
            CliError::Mass { .. } => "mass",
            CliError::Shape { .. } => "shape",
            CliError::Usage(_) => "usage",
            CliError::Budget { .. } => "budget",
            CliError::Numeric(_) => "numeric",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Budget { .. } => exit::BUDGET_REFUSED,
            CliError::Numeric(_) => exit::VERIFICATION_FAILED,
            _ => exit::INPUT_ERROR,
        }
    }
}

impl From<canonical_region::Error> for CliError {
    fn from(e: canonical_region::Error) -> Self {
        use canonical_region::Error as E;
        match e {
            E::Budget { estimated, budget } => CliError::Budget { estimated, budget },
            E::NumericIntegrity { .. } | E::Internal(_) => CliError::Numeric(e),
            other => CliError::Shape {
                origin: "input".into(),
                message: other.to_string(),
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
