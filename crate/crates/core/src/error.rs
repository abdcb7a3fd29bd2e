use thiserror::Error;

pub type Result<T, E = KleError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KleError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("target {target} outside forward range [{range_lo}, {range_hi}] of the bracket")]
    Bracket {
        target: f64,
        range_lo: f64,
        range_hi: f64,
    },

    /// Adaptive quadrature gave up; `estimate` is the best value reached.
    #[error("quadrature did not converge: estimate {estimate_re}+{estimate_im}i, achieved error {achieved}")]
    Quadrature {
        estimate_re: f64,
        estimate_im: f64,
        achieved: f64,
    },

    #[error("model rejected: {0}")]
    Condition(String),

    #[error("first moment of the Levy measure is infinite")]
    InfiniteMean,

    #[error("series exceeded {max_terms} terms (last arrival {last_arrival})")]
    MaxTerms { max_terms: usize, last_arrival: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("coefficient sample carries no shot record")]
    MissingShotRecord,

    #[error("insufficient samples: need at least {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },
}
