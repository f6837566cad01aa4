use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("degenerate batch: batch normalization in train mode requires at least one row")]
    DegenerateBatch,

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Divergence {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("mismatch sampling unsatisfiable: dataset has a single category")]
    MismatchUnsatisfiable,

    #[error("stratification error: category {category} has {available} instances but {requested} subsets were requested")]
    Stratification {
        category: usize,
        available: usize,
        requested: usize,
    },

    #[error("format error in {path}: {detail}")]
    Format { path: String, detail: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("undefined similarity: zero vector")]
    ZeroVector,

    #[error("undefined average precision: query has no relevant items")]
    UndefinedAp,

    #[error("no valid queries: every query had zero relevant items")]
    NoValidQueries,

    #[error("dimension mismatch: checkpoint expects (d_img={ckpt_img}, d_txt={ckpt_txt}), dataset provides (d_img={data_img}, d_txt={data_txt})")]
    DimensionMismatch {
        ckpt_img: usize,
        ckpt_txt: usize,
        data_img: usize,
        data_txt: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }

    /// Process exit code for the CLI. Distinct codes per error family.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Format { .. } | Error::EmptyDataset => 3,
            Error::Divergence { .. } => 4,
            Error::DimensionMismatch { .. } | Error::Shape { .. } => 5,
            _ => 1,
        }
    }
}
