use thiserror::Error;

pub type Result<T, E = DqiError> = std::result::Result<T, E>;

/// Every failure the engine can report.
///
/// Variants are grouped by the layer that raises them; the service layer maps
/// each one onto a stable API error code.
#[derive(Debug, Error)]
pub enum DqiError {
    #[error("input is empty")]
    EmptyInput,
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("rule {index} is malformed: {message}")]
    InvalidRule { index: usize, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid procedure spec: {0}")]
    InvalidSpec(String),
    #[error("column `{column}`: {message}")]
    IncompatibleColumn { column: String, message: String },
    #[error("column `{0}` has no observed values")]
    AllMissing(String),
    #[error("k = {k} exceeds the {donors} available donor rows")]
    NotEnoughDonors { k: usize, donors: usize },
    #[error("design matrix is singular; collinear columns: {}", columns.join(", "))]
    SingularDesign { columns: Vec<String> },
    #[error("empty result refused")]
    EmptyResult,
    #[error("label column `{0}` cannot be removed or used as a feature")]
    LabelProtected(String),
    #[error("flags were computed on snapshot {flagged}, not {current}")]
    StaleFlags { flagged: String, current: String },

    #[error("sample is empty")]
    EmptySample,
    #[error("snapshots share no columns")]
    NoSharedColumns,

    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("non-finite feature value at row {row}, feature {feature}")]
    NonFinite { row: usize, feature: usize },

    #[error("script expects root snapshot {expected}, the input hashes to {found}")]
    RootMismatch { expected: String, found: String },
    #[error("unknown snapshot {0}")]
    UnknownSnapshot(String),
    #[error("session file version {found} is not supported (expected {expected})")]
    SessionVersion { found: u32, expected: u32 },
    #[error("corrupt session file: {0}")]
    SessionFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl DqiError {
    /// Stable machine-readable identifier of the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            DqiError::EmptyInput => "empty_input",
            DqiError::Csv(_) => "malformed_csv",
            DqiError::RaggedRow { .. } => "ragged_row",
            DqiError::DuplicateColumn(_) => "duplicate_column",
            DqiError::InvalidSchema(_) => "invalid_schema",
            DqiError::UnknownColumn(_) => "unknown_column",
            DqiError::InvalidRule { .. } => "invalid_rule",
            DqiError::InvalidConfig(_) => "invalid_config",
            DqiError::InvalidSpec(_) => "invalid_spec",
            DqiError::IncompatibleColumn { .. } => "incompatible_column",
            DqiError::AllMissing(_) => "all_missing",
            DqiError::NotEnoughDonors { .. } => "not_enough_donors",
            DqiError::SingularDesign { .. } => "singular_design",
            DqiError::EmptyResult => "empty_result",
            DqiError::LabelProtected(_) => "label_protected",
            DqiError::StaleFlags { .. } => "stale_flags",
            DqiError::EmptySample => "empty_sample",
            DqiError::NoSharedColumns => "no_shared_columns",
            DqiError::InsufficientData(_) => "insufficient_data",
            DqiError::NonFinite { .. } => "non_finite",
            DqiError::RootMismatch { .. } => "root_mismatch",
            DqiError::UnknownSnapshot(_) => "unknown_snapshot",
            DqiError::SessionVersion { .. } => "session_version",
            DqiError::SessionFormat(_) => "session_format",
            DqiError::Io(_) => "io",
            DqiError::Json(_) => "invalid_json",
        }
    }

    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        DqiError::InvalidSpec(msg.into())
    }

    pub(crate) fn incompatible(column: &str, msg: impl Into<String>) -> Self {
        DqiError::IncompatibleColumn {
            column: column.to_string(),
            message: msg.into(),
        }
    }
}
