use thiserror::Error;

/// Errors raised by the estimators and engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SopError {
    /// Invalid model, curve, window or SOA configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A closed form was evaluated outside the region where its denominator is positive.
    #[error("analytic domain error: {0}")]
    Domain(String),

    /// No current realises the requested power at a step.
    #[error("power {power_w} W is not attainable at this step")]
    PowerInfeasible { power_w: f64 },

    /// Malformed time series or other caller-supplied data.
    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, SopError>;
