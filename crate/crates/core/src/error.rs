use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A matrix or vector does not have the shape implied by the game dimensions.
    #[error("dimension mismatch in {what} (stage {stage}, player {player}, type {type_index}): expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        stage: usize,
        player: usize,
        type_index: usize,
        expected: String,
        found: String,
    },

    #[error("stage {stage} out of range (horizon {horizon})")]
    StageOutOfRange { stage: usize, horizon: usize },

    /// `R = F_ii + B' S B` failed the positive-definiteness test.
    #[error("no equilibrium at stage {stage}: R for player {player} type {type_index} is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NoEquilibrium {
        stage: usize,
        player: usize,
        type_index: usize,
        min_eigenvalue: f64,
    },

    /// The stacked coupling matrix is numerically singular.
    #[error("singular coupling system at stage {stage}: reciprocal condition number {rcond:e}")]
    SingularCoupling { stage: usize, rcond: f64 },

    #[error("no hypothesized action for joint type {joint_type:?}")]
    MissingAction { joint_type: Vec<usize> },

    #[error("invalid belief for player {player} type {type_index}: {reason}")]
    InvalidBelief {
        player: usize,
        type_index: usize,
        reason: String,
    },

    #[error("noise density is degenerate at stage {stage}: {reason}")]
    DegenerateNoise { stage: usize, reason: String },

    #[error("{0}")]
    InvalidArgument(String),

    /// An episode inside a batch failed; `seed` reproduces it.
    #[error("episode with seed {seed} failed: {source}")]
    Episode { seed: u64, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
