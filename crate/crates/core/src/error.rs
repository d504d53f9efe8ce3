use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),

    #[error("not a valid state: {0}")]
    NotAState(String),

    #[error("matrix is not unitary (defect {0:e})")]
    NotUnitary(f64),

    #[error("map is not completely positive (min Choi eigenvalue {min_eig:e})")]
    NotCp { min_eig: f64 },

    #[error("map does not preserve Hermiticity (defect {0:e})")]
    NotHermiticityPreserving(f64),

    #[error("bad probability vector: {0}")]
    BadProbabilityVector(String),

    #[error("generator family is not commutative (defect {defect:e})")]
    NotCommutative { defect: f64 },

    #[error("dynamical map is numerically singular (condition number {condition_number:e})")]
    SingularMap { condition_number: f64 },

    #[error("degenerate time t = {t}: exp(Gamma(t)) - 1 vanishes")]
    DegenerateTime { t: f64 },

    #[error("negative input: {0}")]
    NegativeInput(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid rate function: {0}")]
    InvalidRate(String),

    #[error("non-finite values in the dynamical map at t = {time}")]
    NonFinite { time: f64 },

    #[error("scenario construction failed: {0}")]
    ConstructionFailed(String),
}

impl Error {
    /// Whether the error stems from bad input rather than from the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_)
                | Error::NotHermitian(_)
                | Error::NotAState(_)
                | Error::NotUnitary(_)
                | Error::BadProbabilityVector(_)
                | Error::NegativeInput(_)
                | Error::InvalidGrid(_)
                | Error::InvalidRate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
