//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A communication rate failed one of its structural assumptions.
    /// `assumption` names the violated property.
    #[error("communication rate violates `{assumption}`: {detail}")]
    RateAssumption {
        assumption: &'static str,
        detail: String,
    },

    /// A constructor or operation received an argument outside its domain.
    #[error("invalid `{what}`: {detail}")]
    InvalidArgument { what: &'static str, detail: String },

    /// Integration bounds out of order.
    #[error("integration bounds must satisfy a <= b, got a = {a}, b = {b}")]
    InvalidInterval { a: f64, b: f64 },

    /// The flocking condition does not hold, so a flocking-only quantity
    /// (x_inf, the stability constant, ...) is undefined.
    #[error("flocking condition violated: strength {strength} is not above the threshold {threshold}")]
    FlockingViolated { strength: f64, threshold: f64 },

    /// An integrator step produced a non-finite coordinate.
    #[error("numerical blow-up at step {step}: non-finite state")]
    BlowUp { step: usize },

    /// Measures with different ambient dimensions.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// Paired point lists of different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Cloning two measures to a common size would exceed the configured cap.
    /// Callers should choose sizes that divide each other (for experiments:
    /// ensemble sizes that divide the reference size), subsample, or raise
    /// the cap.
    #[error(
        "cloning to lcm({n}, {m}) = {lcm} points exceeds the size cap {cap}; \
         choose sizes that divide each other, subsample, or raise the cap"
    )]
    SizeCapExceeded {
        n: usize,
        m: usize,
        lcm: usize,
        cap: usize,
    },

    /// The factorial-time reference matcher is restricted to tiny inputs.
    #[error("brute-force matching is limited to n <= {max}, got n = {n}")]
    BruteForceTooLarge { n: usize, max: usize },

    /// A Monte Carlo replicate failed; carries the replicate index and the
    /// ensemble size it was working on.
    #[error("replicate {replicate} (J = {ensemble_size}) failed: {source}")]
    Replicate {
        replicate: usize,
        ensemble_size: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn in_replicate(self, replicate: usize, ensemble_size: usize) -> Self {
        Error::Replicate {
            replicate,
            ensemble_size,
            source: Box::new(self),
        }
    }
}
