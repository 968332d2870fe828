use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (minimum eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("angle {0} outside [0, pi/4]")]
    AngleRange(f64),
    #[error("parameter `{name}` = {value} outside {range}")]
    Parameter { name: &'static str, value: f64, range: &'static str },
    #[error("corrective unitaries require a pure input state")]
    NeedsPureState,
    #[error("history length {got} exceeds plan length {rounds}")]
    PlanTooShort { got: usize, rounds: usize },
    #[error("strategy count {count} exceeds cap {cap}")]
    TooManyStrategies { count: u128, cap: usize },
    #[error("alphabet mismatch: {0}")]
    Alphabet(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("infeasible program, offending constraint family: {0}")]
    Infeasible(String),
    #[error("circuit error: {0}")]
    Circuit(String),
    #[error("vacuous bound: {0}")]
    Vacuous(String),
}

pub type Result<T> = std::result::Result<T, Error>;
