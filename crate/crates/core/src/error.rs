use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("topic {topic}: duplicate rank {rank}")]
    DuplicateRank { topic: String, rank: u32 },
    #[error("topic {topic}: duplicate document {doc}")]
    DuplicateDoc { topic: String, doc: String },
    #[error("topic {topic}: rank gap, expected rank {expected} but found {found}")]
    RankGap {
        topic: String,
        expected: u32,
        found: u32,
    },
    #[error("line {line}: run tag {found:?} differs from {expected:?}")]
    NonUniformTag {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("conflicting judgments for topic {topic}, document {doc}")]
    ConflictingJudgment { topic: String, doc: String },
    #[error("topic {topic} not present in run {system}")]
    MissingTopic { system: String, topic: String },
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error("ratio undefined: denominator curve is identically zero")]
    UndefinedRatio,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("degenerate angle: sin(theta) = {sin:e} below threshold")]
    DegenerateAngle { sin: f64 },
    #[error("geometrically inconsistent: {0}")]
    GeometricInconsistency(String),
    #[error("gram matrix not repairable: smallest eigenvalue {min_eigenvalue:.6}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("no pair statistics for {numerator}/{denominator}")]
    MissingPairStats {
        numerator: String,
        denominator: String,
    },
    #[error("unknown system {0}")]
    UnknownSystem(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid synthetic profile: {0}")]
    InvalidProfile(String),
    #[error("truth has {found} entries, expected {expected}")]
    TruthLengthMismatch { expected: usize, found: usize },
    #[error("no runs supplied")]
    EmptyRunSet,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, printed by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Malformed { .. }
            | Error::DuplicateRank { .. }
            | Error::DuplicateDoc { .. }
            | Error::RankGap { .. }
            | Error::NonUniformTag { .. }
            | Error::ConflictingJudgment { .. }
            | Error::Csv(_)
            | Error::Json(_) => "parse",
            Error::MissingTopic { .. }
            | Error::Mismatch(_)
            | Error::MissingPairStats { .. }
            | Error::UnknownSystem(_)
            | Error::TruthLengthMismatch { .. }
            | Error::EmptyRunSet => "input",
            Error::UndefinedRatio
            | Error::DegenerateInput(_)
            | Error::DegenerateAngle { .. }
            | Error::GeometricInconsistency(_)
            | Error::NotPositiveSemidefinite { .. } => "geometry",
            Error::InvalidConfig(_) | Error::InvalidProfile(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
