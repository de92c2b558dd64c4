use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// `∇h(x) = 0`; only happens at the obstacle center.
    #[error("barrier gradient vanishes at the evaluation point")]
    SingularGradient,

    #[error("initial position is on or outside the safe set boundary (h(x0) = {h0})")]
    InitialStateNotInterior { h0: f64 },

    #[error("input matrix G is singular")]
    SingularInputMatrix,

    #[error("epsilon = {epsilon} exceeds the admissible bound alpha*gamma/eta = {bound}")]
    EpsilonNotAdmissible { epsilon: f64, bound: f64 },

    #[error("infeasible projection: zero constraint row with violated offset")]
    Infeasible,

    #[error("state diverged at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}
