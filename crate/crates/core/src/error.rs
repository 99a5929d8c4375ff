use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate field: {0} requires b_z > 0")]
    DegenerateField(&'static str),

    #[error("grid too small: state n={n} keeps {tail:.3e} of its norm near z_max (limit {limit:.1e})")]
    GridTooSmall { n: usize, tail: f64, limit: f64 },

    #[error("eigensolver failed to converge: {0}")]
    ConvergenceFailure(String),

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("no crossing of {pair} in b_z range [{lo}, {hi}] T")]
    NoCrossingInRange { pair: String, lo: f64, hi: f64 },

    #[error("branch tracking lost at sweep point {point}: best overlap {overlap:.3}")]
    BranchTrackingLost { point: usize, overlap: f64 },

    #[error(
        "near resonance: |{n},{l}> couples to n'={n_prime} with detuning {detuning:.4e} vs guard {guard:.4e} (scaled units)"
    )]
    NearResonance { n: usize, l: usize, n_prime: usize, detuning: f64, guard: f64 },

    #[error("transition is not downward: {0}")]
    NotDownward(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
