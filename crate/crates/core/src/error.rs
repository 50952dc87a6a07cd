use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("problem has {n} variables, brute force limit is {limit}")]
    SizeLimitExceeded { n: usize, limit: usize },
    #[error("dynamic programming table of {cells} cells exceeds budget {budget}")]
    CapacityBudgetExceeded { cells: u128, budget: u128 },
    #[error("no feasible solution")]
    Infeasible,
    #[error("assignment violates constraint {0}")]
    InfeasibleAssignment(usize),
    #[error("constraint {index} has non-positive slack range {max_slack}")]
    VacuousConstraint { index: usize, max_slack: i128 },
    #[error("{requested} qubits exceeds the simulator cap of {cap}")]
    QubitCapExceeded { requested: usize, cap: usize },
    #[error("dimension mismatch: state has {state} qubits, circuit has {circuit}")]
    DimensionMismatch { state: usize, circuit: usize },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("empty input: {0}")]
    Empty(String),
}

pub type Result<T> = std::result::Result<T, Error>;
