use thiserror::Error;

use crate::lattice::{Family, NodeIndex};

/// Errors raised by the lattice toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("invalid lattice parameter: {0}")]
    InvalidSpec(String),

    #[error("node {0:?} is not valid for the {1:?} lattice")]
    InvalidIndex(NodeIndex, Family),

    #[error("branch {branch} does not exist for the {family:?} lattice")]
    InvalidBranch { family: Family, branch: String },

    #[error("omega = {omega} is not an interior resonance; see resonance_catalog for the admissible values")]
    NotResonant { omega: f64 },

    #[error("omega = {omega} is a {kind} resonance and has no beaming directions")]
    NoBeaming { omega: f64, kind: String },

    #[error("no localized primitive waveform exists for this configuration: {0}")]
    NoLpw(String),

    #[error("invalid simulation setup: {0}")]
    InvalidConfig(String),

    #[error("window too small: {axis}-reach {available} < required {required} for t_end = {t_end}")]
    WindowTooSmall {
        axis: char,
        available: i64,
        required: i64,
        t_end: f64,
    },

    #[error("invalid analysis input: {0}")]
    InvalidInput(String),

    #[error("numerical consistency failure: {0}")]
    Numerical(String),
}

impl LatticeError {
    /// Variant name, used as a stable error tag by front ends.
    pub fn name(&self) -> &'static str {
        match self {
            LatticeError::InvalidSpec(_) => "InvalidSpec",
            LatticeError::InvalidIndex(..) => "InvalidIndex",
            LatticeError::InvalidBranch { .. } => "InvalidBranch",
            LatticeError::NotResonant { .. } => "NotResonant",
            LatticeError::NoBeaming { .. } => "NoBeaming",
            LatticeError::NoLpw(_) => "NoLpw",
            LatticeError::InvalidConfig(_) => "InvalidConfig",
            LatticeError::WindowTooSmall { .. } => "WindowTooSmall",
            LatticeError::InvalidInput(_) => "InvalidInput",
            LatticeError::Numerical(_) => "Numerical",
        }
    }
}

pub type Result<T> = std::result::Result<T, LatticeError>;
