use chrono::NaiveDate;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("day-of-year {doy} has {got} non-missing years, need at least {needed}")]
    Coverage { doy: usize, got: usize, needed: usize },

    #[error("smoothed standard deviation is not positive at day-of-year {doy} ({value})")]
    DegenerateVariance { doy: usize, value: f64 },

    #[error("regressor is constant; the regression is collinear with the intercept")]
    Collinear,

    #[error("series and regressor share no non-missing dates")]
    EmptyOverlap,

    #[error("regressor has no value on {0}")]
    RegressorCoverage(NaiveDate),

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("mixture component {component} is degenerate: {reason}")]
    DegenerateComponent { component: usize, reason: String },

    #[error("no model could be fitted:\n{0}")]
    AllFitsFailed(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate observation for cell {cell} on {date}")]
    DuplicateDate { cell: String, date: NaiveDate },

    #[error("cell {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_cell(self, cell: &str) -> Self {
        Error::Cell {
            cell: cell.to_owned(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
