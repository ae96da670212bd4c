use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, MtlError>;

#[derive(Debug, Error)]
pub enum MtlError {
    #[error("invalid population: {0}")]
    InvalidPopulation(String),
    #[error("driver series too short: {days} days, need at least {min}")]
    SeriesTooShort { days: usize, min: usize },
    #[error("temperature {0} degC outside the density domain [-0.5, 40]")]
    DensityDomain(f64),
    #[error("simulation diverged on {date}")]
    SimulationDiverged { date: NaiveDate },
    #[error("no data: {0}")]
    NoData(String),
    #[error("field needs at least two depths, got {0}")]
    InsufficientDepths(usize),
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },
    #[error("depth {depth} m outside lake {lake_id} (max depth {max_depth} m)")]
    DepthOutOfRange {
        lake_id: String,
        depth: f64,
        max_depth: f64,
    },
    #[error("incomplete bundle for lake {0}: missing PB0 field")]
    IncompleteBundle(String),
    #[error("lathrop index undefined for surface area {area_ha} ha")]
    LathropUndefined { area_ha: f64 },
    #[error("data error: {0}")]
    Data(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("cannot build {k} folds from {rows} rows")]
    Fold { rows: usize, k: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("feature selection needs at least two features, got {0}")]
    TrivialSelection(usize),
    #[error("no overlap between prediction grid and observations")]
    NoOverlap,
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("incomplete sources: {0}")]
    IncompleteSources(String),
    #[error("unknown lake id {0}")]
    UnknownLake(String),
    #[error("schema violation in {file}: {detail}")]
    Schema { file: String, detail: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MtlError {
    /// Stable, machine-readable error kind.
    pub fn code(&self) -> &'static str {
        match self {
            MtlError::InvalidPopulation(_) => "invalid-population",
            MtlError::SeriesTooShort { .. } => "too-short-series",
            MtlError::DensityDomain(_) => "domain",
            MtlError::SimulationDiverged { .. } => "simulation-diverged",
            MtlError::NoData(_) => "no-data",
            MtlError::InsufficientDepths(_) => "insufficient-depths",
            MtlError::TrainingDiverged { .. } => "training-diverged",
            MtlError::DepthOutOfRange { .. } => "domain",
            MtlError::IncompleteBundle(_) => "incomplete-bundle",
            MtlError::LathropUndefined { .. } => "undefined-index",
            MtlError::Data(_) => "data",
            MtlError::Shape { .. } => "shape",
            MtlError::Fold { .. } => "fold",
            MtlError::Config(_) => "config",
            MtlError::TrivialSelection(_) => "trivial-selection",
            MtlError::NoOverlap => "no-overlap",
            MtlError::UndefinedCorrelation(_) => "undefined-correlation",
            MtlError::IncompleteSources(_) => "incomplete-sources",
            MtlError::UnknownLake(_) => "unknown-lake",
            MtlError::Schema { .. } => "schema",
            MtlError::Parse(_) => "parse",
            MtlError::Io(_) => "io",
            MtlError::Csv(_) => "csv",
            MtlError::Json(_) => "json",
        }
    }
}
