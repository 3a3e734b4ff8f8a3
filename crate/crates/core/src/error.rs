use std::path::PathBuf;

/// Everything that can go wrong in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// CSV syntax or value problem; `row` and `col` are 1-based positions in
    /// the file (the header line, when present, counts as row 1).
    #[error("csv error at row {row}, column {col}: {msg}")]
    Csv { row: usize, col: usize, msg: String },

    #[error("empty dataset: {0}")]
    EmptyData(String),

    #[error("label column {0:?} not found")]
    LabelColumn(String),

    #[error("{context}: expected dimension {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter {name}={value}: admissible range is {range}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("cluster count k={k} is invalid for {m} samples (need 1 <= k <= m)")]
    BadClusterCount { k: usize, m: usize },

    #[error("initial assignment leaves cluster {cluster} empty")]
    EmptyInitCluster { cluster: usize },

    #[error("label vectors disagree in length: {left} vs {right}")]
    LabelLength { left: usize, right: usize },

    #[error("label value {value} outside 1..={k}")]
    LabelRange { value: i64, k: usize },

    #[error("model file error at line {line}: {msg}")]
    ModelFormat { line: usize, msg: String },

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
