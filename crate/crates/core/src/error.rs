use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("evaluation point {t} lies outside [0, 1]")]
    Domain { t: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("underdetermined: {samples} samples cannot resolve {dim} coefficients")]
    Underdetermined { samples: usize, dim: usize },

    /// Local quadratic normal equations could not be solved at `u`.
    #[error("singular local fit at u={u} ({points} points in window, condition {condition:e}){}", row.map(|r| format!(" in smoother row {r}")).unwrap_or_default())]
    SingularFit {
        u: f64,
        points: usize,
        condition: f64,
        row: Option<usize>,
    },

    #[error("no neighbour of sample {index} within the kernel window")]
    EmptyWindow { index: usize },

    #[error("cannot normalize a zero coefficient vector")]
    Normalization,

    #[error("objective is degenerate: every sample has an empty leave-one-out window")]
    DegenerateObjective,

    #[error("objective is not finite at the initial point")]
    NonFiniteInit,

    #[error("smoother overfits: tr(I - S) = {trace}")]
    OverfitDegeneracy { trace: f64 },

    #[error("least-squares design is rank deficient")]
    RankDeficient,

    #[error("bandwidth selection failed at every grid point")]
    SelectionFailed,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    ParseCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by malformed input data rather than a failed estimate.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::ParseCell { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Io(_)
                | Error::DimensionMismatch { .. }
                | Error::Underdetermined { .. }
                | Error::InvalidInput(_)
                | Error::Domain { .. }
        )
    }
}
