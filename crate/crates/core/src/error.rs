use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerically singular basis")]
    SingularBasis,

    #[error("enumeration refused: about {predicted:.3e} points predicted (limit {limit:.0e})")]
    EnumerationTooLarge { predicted: f64, limit: f64 },

    #[error("approximation function too large: psi({q}) = {value} exceeds 10")]
    PsiTooLarge { q: u64, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no transversal witness after {tries} tries (best wedge norm {best:.3e})")]
    WitnessNotFound { tries: usize, best: f64 },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

pub type Result<T> = std::result::Result<T, Error>;
