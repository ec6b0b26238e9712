//! Command-line front end: problem files, extreme-point tables, verification
//! suites and inner-bound tracing, on top of `canonical_region`.

pub mod commands;
pub mod error;
pub mod problem;
pub mod report;

pub use commands::{main_with_args, run, Cli};
pub use error::{exit, CliError};
pub use problem::{load_problem, parse_problem, LoadedProblem, ProblemFile};
