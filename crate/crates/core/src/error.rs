use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed breakpoint list or mismatched lengths.
    #[error("structural error: {0}")]
    Structural(String),

    /// Argument outside the operation's domain (zero element, q outside [0,1],
    /// nonpositive epsilon, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition does not hold (e.g. target not orthogonal to
    /// the family, family not orthonormal).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Partition growth exceeded the configured ceiling.
    #[error("cell ceiling exceeded: {cells} cells > limit {limit}{}", stage.map(|m| format!(" (stage {m})")).unwrap_or_default())]
    CellCeiling {
        cells: usize,
        limit: usize,
        stage: Option<usize>,
    },

    /// A postcondition that construction should guarantee failed its check.
    #[error("certificate failed: {0}")]
    Certificate(String),

    /// Floating-point model: a toleranced identity was violated.
    #[error("tolerance violated: {check}: |deviation| = {deviation:e} > {tolerance:e}")]
    Tolerance {
        check: String,
        deviation: f64,
        tolerance: f64,
    },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl Error {
    pub(crate) fn with_stage(self, m: usize) -> Self {
        match self {
            Error::CellCeiling { cells, limit, .. } => Error::CellCeiling {
                cells,
                limit,
                stage: Some(m),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
