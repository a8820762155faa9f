use thiserror::Error;

/// Errors raised by dataset handling, scoring, generation and the exact solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("duplicate team id {0:?}")]
    DuplicateTeam(String),
    #[error("team {team:?}: {field} out of range ({value})")]
    OutOfRange {
        team: String,
        field: &'static str,
        value: f64,
    },
    #[error("unknown team id {0:?}")]
    UnknownTeam(String),
    #[error("team {0:?} is not assigned in the structure")]
    MissingTeam(String),
    #[error("structure does not match dataset: {0}")]
    StructureMismatch(String),
    #[error("invalid template: {0}")]
    Template(String),
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("regression: {0}")]
    Regression(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("invalid predicate: {0}")]
    Predicate(String),
    #[error("unknown name {kind} {name:?}")]
    UnknownName { kind: &'static str, name: String },
    #[error("instance too large for the internal exact solver ({teams} teams > {limit}); use the LP export instead")]
    TooLarge { teams: usize, limit: usize },
    #[error("search budget exceeded after {nodes} nodes")]
    BudgetExceeded {
        nodes: u64,
        /// Best structure found before the budget ran out.
        incumbent: Option<Box<crate::surrogate::ScoredStructure<f64>>>,
    },
    #[error("no structure satisfies the predicates: {0}")]
    Infeasible(String),
    #[error("invalid option: {0}")]
    Options(String),
    #[error("problem definitions differ: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
