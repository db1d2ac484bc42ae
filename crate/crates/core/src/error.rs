use thiserror::Error;

/// Everything that can go wrong in this crate, from law construction to
/// simulation blowup. Validation messages name the violated invariant so
/// config errors surface verbatim at the CLI.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid offspring law: {0}")]
    InvalidOffspring(String),

    #[error("invalid environment law: {0}")]
    InvalidEnvironment(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Argument outside the mathematical domain of an operation, e.g. a
    /// rate-function argument past the endpoint of its definition interval.
    #[error("domain error: {0}")]
    Domain(String),

    /// The particle population outgrew the configured cap. Tree mode cannot
    /// continue; the run needs the count-based simulator.
    #[error("population cap exceeded at generation {generation}: {population} particles")]
    CapExceeded { generation: u32, population: u64 },

    /// Exhaustive enumeration was asked for an instance above the node budget.
    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),

    /// A genealogy whose parent/child positions violate the one-step-right
    /// movement rule; indicates a bug upstream, not bad user input.
    #[error("malformed genealogy: {0}")]
    MalformedGenealogy(String),

    /// A solver failed to meet its own contract. Should never fire for laws
    /// accepted by the constructors; treated as a bug if it does.
    #[error("internal solver error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
