use std::fmt;

use thiserror::Error;

/// Pipeline stage an error surfaced from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Screen,
    Tune,
    Knockoff,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Screen => "screen",
            Stage::Tune => "tune",
            Stage::Knockoff => "knockoff",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A sample with no spread (constant column, zero self-dependence).
    #[error("degenerate feature{}: {reason}", column.map(|c| format!(" (column {c})")).unwrap_or_default())]
    DegenerateFeature {
        column: Option<usize>,
        reason: String,
    },

    #[error("sample too small: {0}")]
    SampleTooSmall(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{stage} stage: {source}")]
    InStage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(column: Option<usize>, reason: impl Into<String>) -> Self {
        Error::DegenerateFeature {
            column,
            reason: reason.into(),
        }
    }

    /// Attach a column index to a degenerate-feature error that lacks one.
    pub(crate) fn with_column(self, column: usize) -> Self {
        match self {
            Error::DegenerateFeature { column: None, reason } => Error::DegenerateFeature {
                column: Some(column),
                reason,
            },
            other => other,
        }
    }

    pub(crate) fn in_stage(self, stage: Stage) -> Self {
        match self {
            e @ Error::InStage { .. } => e,
            e => Error::InStage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with any stage wrapper stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::InStage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::InStage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
