use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Observation arrived under a model where both the predicted state and
    /// the observation are deterministic, and they disagree.
    #[error(
        "degenerate update: predicted state N({predicted_mean}, 0) with zero observation \
         variance cannot explain y = {observation}"
    )]
    DegenerateUpdate { predicted_mean: f64, observation: f64 },

    #[error("total weight degeneracy: every particle has zero likelihood")]
    TotalDegeneracy,

    #[error("length mismatch in {context}: {left} vs {right}")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("predictor returned non-finite value {value} at t = {t}")]
    Predictor { t: usize, value: f64 },

    #[error("{path}: row {row}, column `{column}`: {message}")]
    Load {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
