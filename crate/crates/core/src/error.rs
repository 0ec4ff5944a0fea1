use alloc::string::String;

/// Errors raised by the chain builders, engines and oracles.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("resource limit exceeded: {what} needs {requested}, cap is {cap}")]
    Resource {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("site index {index} out of range 1..={count}")]
    SiteIndex { index: usize, count: usize },

    #[error("operator does not conserve excitation number (commutator max-abs {0:.3e})")]
    NotConserving(f64),

    #[error("{builder} cannot represent nonzero `{param}`")]
    WrongBuilder {
        builder: &'static str,
        param: &'static str,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("window [{k}, {l}] must satisfy 1 < k <= l < {sites}")]
    Boundary { k: usize, l: usize, sites: usize },

    #[error("stability error: {0}")]
    Stability(String),

    #[error("mode error: {0}")]
    Mode(String),
}

pub type Result<T> = core::result::Result<T, Error>;
