use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The target vertex is not reachable from the source vertex.
    #[error("no path from {from} to {to}")]
    NoPath { from: usize, to: usize },

    /// A numerical routine could not reach the requested accuracy.
    #[error("accuracy {requested:e} not reached (achieved {achieved:e})")]
    Accuracy { requested: f64, achieved: f64 },

    /// The problem is larger than the dense algebra budget.
    #[error("dimension {dim} exceeds dense capacity {limit}")]
    Capacity { dim: usize, limit: usize },

    /// Shortest-path enumeration would return more paths than allowed.
    #[error("{count} shortest paths exceed the enumeration limit {limit}")]
    PathOverflow { count: u128, limit: usize },

    /// Shortest-path count does not fit in 128 bits.
    #[error("shortest-path count overflow")]
    CountOverflow,

    /// Two independent constructions of the same object disagree.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
