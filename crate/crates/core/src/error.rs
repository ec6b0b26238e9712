use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("variable {0} is not an axis of this distribution")]
    UnknownAxis(u8),
    #[error("variable sets overlap: {0}")]
    Overlap(&'static str),
    #[error("empty variable set: {0}")]
    EmptySet(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid probability data: {0}")]
    Probability(String),
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("numeric integrity violated: {what} = {value:e}")]
    NumericIntegrity { what: &'static str, value: f64 },
    #[error("inadmissible direction: {0}")]
    InadmissibleDirection(String),
    #[error("invalid index: {0}")]
    Index(String),
    #[error("rate vector is not in the region (worst slack {worst_slack:e})")]
    NotMember { worst_slack: f64 },
    #[error("enumeration refused: {0}")]
    TooLarge(String),
    #[error("budget exceeded: estimated {estimated} evaluations, budget {budget}")]
    Budget { estimated: u128, budget: u128 },
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("internal error: {0}")]
    Internal(&'static str),
}
