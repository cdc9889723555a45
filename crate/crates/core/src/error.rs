use std::fmt;

use serde::{Deserialize, Serialize};

/// Constraint families, used to report which part of a problem failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintClass {
    Beampattern,
    SarSnr,
    Power,
    Energy,
    Closure,
    Altitude,
    SpeedXy,
    SpeedZ,
    TrustRegion,
    Epigraph,
    Other,
}

impl fmt::Display for ConstraintClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintClass::Beampattern => "beampattern",
            ConstraintClass::SarSnr => "sar_snr",
            ConstraintClass::Power => "power",
            ConstraintClass::Energy => "energy",
            ConstraintClass::Closure => "closure",
            ConstraintClass::Altitude => "altitude",
            ConstraintClass::SpeedXy => "speed_xy",
            ConstraintClass::SpeedZ => "speed_z",
            ConstraintClass::TrustRegion => "trust_region",
            ConstraintClass::Epigraph => "epigraph",
            ConstraintClass::Other => "other",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("scenario validation failed:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("problem infeasible ({class} constraints): {detail}")]
    Infeasible {
        class: ConstraintClass,
        detail: String,
    },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn infeasible(class: ConstraintClass, detail: impl Into<String>) -> Self {
        Error::Infeasible {
            class,
            detail: detail.into(),
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. })
    }

    pub fn infeasible_class(&self) -> Option<ConstraintClass> {
        match self {
            Error::Infeasible { class, .. } => Some(*class),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
