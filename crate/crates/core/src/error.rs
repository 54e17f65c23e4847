use thiserror::Error;

use crate::fock::ModeLabel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state norm {norm:e} is below the amplitude threshold")]
    ZeroNorm { norm: f64 },

    #[error("mode {0} appears more than once in an element")]
    DuplicateMode(ModeLabel),

    #[error("mode {0} is not part of the circuit's mode set")]
    UnknownMode(ModeLabel),

    #[error("invalid optical element: {0}")]
    InvalidElement(String),

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NonUnitary { deviation: f64 },

    #[error("no amplitude survives post-selection on {pattern}")]
    EmptyPostselection { pattern: String },

    #[error("state has unsupported support: {0}")]
    UnsupportedSupport(String),

    #[error("invalid distinguishability configuration: {0}")]
    InvalidDistinguishability(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("measurement settings are not informationally complete: {0}")]
    IncompleteSettings(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("configuration error: {0}")]
    Config(String),
}
