use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Runtime,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("row {row}: timestamp {value:?} could not be parsed")]
    TimestampParse { row: usize, value: String },

    #[error("row {row}: timestamp {value} is not on the 15-minute grid")]
    OffGrid { row: usize, value: String },

    #[error("row {row}: timestamp {value} does not follow the previous row by exactly 15 minutes")]
    NonMonotonic { row: usize, value: String },

    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    ValueParse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column {0:?} is listed in the manifest but absent from the file")]
    MissingColumn(String),

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("duplicate column {0:?}")]
    DuplicateColumn(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("index mismatch: {0}")]
    IndexMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("variant {variant} requires {class} columns, none present")]
    MissingFeatureClass { variant: String, class: String },

    #[error("feature layout does not match model: {0}")]
    FeatureLayout(String),

    #[error("target formula references undeclared feature {0:?}")]
    UndeclaredFeature(String),

    #[error("daily profile slot {0} has no observations")]
    EmptySlot(usize),

    #[error("model error: {0}")]
    Model(String),

    #[error("node {node} of tree {tree} has {problem}")]
    Cover {
        tree: usize,
        node: usize,
        problem: &'static str,
    },

    #[error("checksum mismatch for {path}: expected {expected}, got {actual}")]
    Checksum {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("network error: {0}")]
    Network(String),

    #[error("missing prerequisite {path}: run `{command}` first")]
    MissingArtifact { path: PathBuf, command: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable snake_case identifier of the variant.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            TimestampParse { .. } => "timestamp_parse",
            OffGrid { .. } => "off_grid",
            NonMonotonic { .. } => "non_monotonic",
            ValueParse { .. } => "value_parse",
            MissingColumn(_) => "missing_column",
            UnknownColumn(_) => "unknown_column",
            DuplicateColumn(_) => "duplicate_column",
            Schema(_) => "schema",
            LengthMismatch(_) => "length_mismatch",
            IndexMismatch(_) => "index_mismatch",
            InvalidArgument(_) => "invalid_argument",
            MissingFeatureClass { .. } => "missing_feature_class",
            FeatureLayout(_) => "feature_layout",
            UndeclaredFeature(_) => "undeclared_feature",
            EmptySlot(_) => "empty_slot",
            Model(_) => "model",
            Cover { .. } => "cover",
            Checksum { .. } => "checksum",
            Network(_) => "network",
            MissingArtifact { .. } => "missing_artifact",
            Io { .. } => "io",
            Config(_) => "config",
            Csv(_) => "csv",
            Json(_) => "json",
        }
    }

    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            Config(_) | InvalidArgument(_) => ErrorCategory::Usage,
            TimestampParse { .. }
            | OffGrid { .. }
            | NonMonotonic { .. }
            | ValueParse { .. }
            | MissingColumn(_)
            | UnknownColumn(_)
            | DuplicateColumn(_)
            | Schema(_)
            | LengthMismatch(_)
            | IndexMismatch(_)
            | MissingFeatureClass { .. }
            | FeatureLayout(_)
            | UndeclaredFeature(_)
            | EmptySlot(_)
            | Checksum { .. }
            | MissingArtifact { .. }
            | Io { .. }
            | Csv(_)
            | Json(_) => ErrorCategory::Data,
            Model(_) | Cover { .. } | Network(_) => ErrorCategory::Runtime,
        }
    }
}
