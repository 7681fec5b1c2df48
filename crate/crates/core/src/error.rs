use thiserror::Error;

/// Errors raised while loading configuration or evaluating the model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed configuration: {0}")]
    Parse(String),

    #[error("missing required key `{section}.{key}`")]
    MissingField { section: String, key: String },

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("`{field}` = {value} is out of range: {reason}")]
    Range { field: String, value: f64, reason: String },

    #[error("both `{0}` and `{1}` given; use only one")]
    ConflictingKeys(String, String),

    #[error("malformed override `{0}`: expected KEY=VALUE")]
    MalformedOverride(String),

    #[error("override key `{0}` given more than once")]
    DuplicateOverride(String),

    #[error("singular linear system at omega = {omega} rad/s (|det| = {det:e})")]
    Singular { omega: f64, det: f64 },

    #[error("control field is off (coupling is zero); thermal transfer undefined")]
    ControlOff,

    #[error("transfer pole within {distance:e} rad/s of the evaluation point")]
    PoleProximity { distance: f64 },

    #[error("expansion step {step} rad/s is not small against min(gamma_f, omega_s) = {scale} rad/s")]
    ExpansionWindow { step: f64, scale: f64 },

    #[error("optical trap is disabled")]
    TrapDisabled,

    #[error("no feasible design point: {0}")]
    Infeasible(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn range(field: &str, value: f64, reason: &str) -> Self {
        Error::Range {
            field: field.to_string(),
            value,
            reason: reason.to_string(),
        }
    }

    /// Whether the error comes from the input rather than from the computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::MissingField { .. }
                | Error::UnknownKey(_)
                | Error::Range { .. }
                | Error::ConflictingKeys(..)
                | Error::MalformedOverride(_)
                | Error::DuplicateOverride(_)
                | Error::TrapDisabled
                | Error::Invalid(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
