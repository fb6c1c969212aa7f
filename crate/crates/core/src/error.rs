use thiserror::Error;

/// Errors raised by the solver library.
///
/// Variants split into two families: validation failures (a supply curve or
/// input object violates its invariants) and domain failures (a well-formed
/// input lies outside the region where an operation is defined). The CLI maps
/// them to distinct exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid demand: {0}")]
    InvalidDemand(String),

    #[error("invalid firm {id}: {reason}")]
    InvalidFirm { id: usize, reason: String },

    #[error("Lipschitz constant must be positive and finite, got {0}")]
    InvalidSlope(f64),

    #[error("no firms given")]
    NoFirms,

    #[error("breakpoint {index} = {value} lies outside [0, {cap}]")]
    BreakpointOutOfRange { index: usize, value: f64, cap: f64 },

    #[error("price {value} lies outside [0, {cap}]")]
    PriceOutOfRange { value: f64, cap: f64 },

    #[error("dominance transform requires a positive clearing price")]
    ZeroClearingPrice,

    #[error("invalid supply curve: {0}")]
    InvalidCurve(String),

    #[error("supply curve segment {segment} has slope {slope}, exceeding the Lipschitz bound {bound}")]
    LipschitzViolation { segment: usize, slope: f64, bound: f64 },

    #[error("firm index {index} out of range for {count} firms")]
    FirmIndex { index: usize, count: usize },

    #[error("malformed quadruple: {0}")]
    MalformedQuadruple(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),
}

impl Error {
    /// True for invariant violations of input objects, false for domain errors.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidDemand(_)
                | Error::InvalidFirm { .. }
                | Error::InvalidSlope(_)
                | Error::InvalidCurve(_)
                | Error::LipschitzViolation { .. }
                | Error::InvalidOption(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
