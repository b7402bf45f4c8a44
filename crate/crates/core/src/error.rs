use crate::index::MultiIndex;

/// Errors produced by the chaos-adapt library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "index set (d = {d}, p = {p}) would hold {entries} coefficient entries, \
         above the limit of {limit}"
    )]
    IndexSetTooLarge { d: usize, p: usize, entries: u128, limit: u128 },

    #[error("matrix is not an isometry: max |A A^T - I| = {residual:.3e}")]
    NotIsometry { residual: f64 },

    #[error("total order {order} exceeds the combinatorial bound {bound} for Gram entries")]
    OrderTooLarge { order: usize, bound: usize },

    #[error("retained index {0} is not a member of the base index set")]
    RetainedNotSubset(MultiIndex),

    #[error(
        "degenerate Gaussian part at grid point {point}{}: first-order coefficient norm {norm:.3e}",
        .location.map(|(x, y)| format!(" (x = ({x}, {y}))")).unwrap_or_default()
    )]
    DegenerateGaussianPart { point: usize, location: Option<(f64, f64)>, norm: f64 },

    #[error("supplied rows are rank deficient (failed to extend past row {row})")]
    RankDeficient { row: usize },

    #[error("point index {index} out of range for {n_points} grid points")]
    PointOutOfRange { index: usize, n_points: usize },

    #[error("covariance matrix is not positive semi-definite: eigenvalue {value:.3e}")]
    NotPositiveSemiDefinite { value: f64 },

    #[error("linear solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },

    #[error("transmissivity must be positive everywhere (cell {cell} has {value})")]
    NonPositiveTransmissivity { cell: usize, value: f64 },

    #[error("too few samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("samples are degenerate (zero variance)")]
    DegenerateSamples,

    #[error("density supports do not overlap")]
    DisjointSupports,

    #[error("invalid variable partition: {0}")]
    InvalidPartition(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
