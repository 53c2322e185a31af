use thiserror::Error;

/// Errors raised by the key-rate, simulation and tomography routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid decoy ordering: need 0 < nu < mu (got mu={mu}, nu={nu})")]
    InvalidDecoyOrdering { mu: f64, nu: f64 },

    #[error("undefined QBER: gain is zero")]
    UndefinedQber,

    #[error("vacuous single-photon estimate: q1 lower bound is zero")]
    VacuousSinglePhoton,

    #[error("value {value} for `{name}` is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("inconsistent basis assignment: {0}")]
    BasisAssignment(String),

    #[error("no sifted events")]
    NoSiftedEvents,

    #[error("channel dead at zero length")]
    DeadChannel,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("undefined polarization: zero Stokes vector")]
    UndefinedPolarization,

    #[error("unknown mode kind `{0}`")]
    UnknownMode(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    range: &'static str,
) -> Result<f64> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(Error::OutOfRange { name, value, range })
    }
}
