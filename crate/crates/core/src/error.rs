use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("site ({y}, {level}) violates the lattice parity constraint")]
    Parity { y: i64, level: u32 },

    #[error("row at level {level} is outside the bond window")]
    WindowViolation { level: u32 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("enumeration needs {bonds} bonds, above the cap of {cap}")]
    InfeasibleEnumeration { bonds: usize, cap: usize },

    #[error("regime error: {0}")]
    Regime(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(argument(format!("probability {p} is outside [0, 1]")))
    }
}
