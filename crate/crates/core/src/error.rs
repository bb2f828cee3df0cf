use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Diagnostics recorded when a Gram matrix could not be factored.
#[derive(Debug, Clone, PartialEq)]
pub struct GramDiagnostics {
    pub size: usize,
    pub last_nugget: f64,
    pub min_diagonal: f64,
    pub max_diagonal: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate design: points {first} and {second} coincide")]
    DegenerateDesign { first: usize, second: usize },

    #[error(
        "ill-conditioned Gram matrix ({} x {}): Cholesky failed with nugget {:e}",
        .0.size, .0.size, .0.last_nugget
    )]
    IllConditioned(GramDiagnostics),

    #[error("likelihood undefined: {0}")]
    UndefinedLikelihood(String),

    #[error("rank-deficient operator: eigenvalue {index} is {value:e}")]
    RankDeficient { index: usize, value: f64 },

    #[error("non-finite value {value} at node {node:?}")]
    Evaluation { node: Vec<f64>, value: f64 },

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("expression error in `{expression}`: {message}")]
    Expression { expression: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// True for failures of the numerical machinery, as opposed to bad data or
    /// unreadable files.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned(_)
                | Error::UndefinedLikelihood(_)
                | Error::RankDeficient { .. }
                | Error::Evaluation { .. }
                | Error::Optimization(_)
        )
    }
}
