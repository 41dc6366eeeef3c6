//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or violated domain invariant.
    #[error("domain error: {0}")]
    Domain(String),

    /// A trajectory leg demands more angular speed than the defender has.
    #[error(
        "infeasible trajectory for defender {defender}: leg from segment {from} to segment {to} \
         needs {needed} s of travel but only {available} s are available"
    )]
    InfeasibleLeg {
        defender: usize,
        from: usize,
        to: usize,
        needed: String,
        available: String,
    },

    /// Some task columns cannot be matched at any finite cost.
    #[error("structurally infeasible assignment: no finite entry for columns {0:?}")]
    InfeasibleColumns(Vec<usize>),

    /// Network initialization found no training sample with the required label.
    #[error("initialization failed for zone {zone}: no usable sample with label {label}")]
    InitCoverage { zone: usize, label: u8 },

    /// A spike pattern with no spikes reached an operation that needs at least one.
    #[error("degenerate input: all channels silent")]
    DegenerateInput,

    /// A weight update hit a zero reference potential and was skipped.
    #[error("degenerate update: zero reference potential at t = {0}")]
    DegenerateUpdate(String),

    #[error("parse error ({context}): {message}")]
    Parse { context: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    /// Process exit code category: config (2), IO/parse (3), numerical (4), other (1).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Shape(_) => 2,
            Error::Io(_) | Error::Parse { .. } => 3,
            Error::DegenerateInput
            | Error::DegenerateUpdate(_)
            | Error::Calibration(_)
            | Error::InitCoverage { .. }
            | Error::InfeasibleColumns(_)
            | Error::InfeasibleLeg { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
