use thiserror::Error;

use crate::panel::{PeriodId, UnitId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}` in header")]
    MissingColumn(String),

    #[error("duplicate observation for unit `{unit}` in period {period}")]
    DuplicateKey { unit: UnitId, period: PeriodId },

    #[error("row {row}: column `{column}` must be strictly positive, got {value}")]
    NonPositive {
        row: usize,
        column: String,
        value: f64,
    },

    #[error("row {row}: cannot parse column `{column}` value `{value}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: missing value in column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("invalid quarter {0}, expected 1..=4")]
    InvalidQuarter(i64),

    #[error("invalid period `{0}`, expected YYYYQn or Qn/YYYY")]
    InvalidPeriod(String),

    #[error("empty unit identifier")]
    EmptyUnit,

    #[error("covariate arity mismatch: expected {expected}, got {got}")]
    CovariateArity { expected: usize, got: usize },

    #[error("no cluster assigned to unit `{0}`")]
    MissingCluster(UnitId),

    #[error("outcome already on log scale")]
    AlreadyLogged,

    #[error("region `{0}` has no wage records")]
    EmptyRegion(UnitId),

    #[error("missing weight for region `{0}`")]
    MissingWeight(UnitId),

    #[error("region sets differ: {0:?}")]
    RegionMismatch(Vec<UnitId>),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("demeaning did not converge after {iterations} iterations (last max change {last_delta:e})")]
    NoConvergence { iterations: usize, last_delta: f64 },

    #[error("all regressors are collinear with the fixed effects")]
    AllCollinear,

    #[error("at least two clusters are required, got {0}")]
    TooFewClusters(usize),

    #[error("too few observations: {rows} rows for {columns} retained columns")]
    TooFewObservations { rows: usize, columns: usize },

    #[error("singular bread matrix in cluster covariance")]
    SingularBread,

    #[error("missing treatment assignment for unit `{0}`")]
    MissingTreatment(UnitId),

    #[error("period {0} not present in data")]
    MissingPeriod(PeriodId),

    #[error("unknown characteristic `{0}`")]
    UnknownCharacteristic(String),

    #[error("unbalanced panel: {0} missing unit-period cells")]
    Unbalanced(usize),

    #[error("decomposition requires a covariate-free panel, found covariates {0:?}")]
    CovariatesPresent(Vec<String>),

    #[error("identification failure: {0}")]
    Identification(String),

    #[error("`{0}` is stochastic and requires --seed")]
    MissingSeed(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "missing_column",
            Error::DuplicateKey { .. } => "duplicate_key",
            Error::NonPositive { .. } => "non_positive",
            Error::Parse { .. } => "parse",
            Error::MissingValue { .. } => "missing_value",
            Error::InvalidQuarter(_) | Error::InvalidPeriod(_) => "invalid_period",
            Error::EmptyUnit => "empty_unit",
            Error::CovariateArity { .. } => "covariate_arity",
            Error::MissingCluster(_) => "missing_cluster",
            Error::AlreadyLogged => "already_logged",
            Error::EmptyRegion(_) => "empty_region",
            Error::MissingWeight(_) => "missing_weight",
            Error::RegionMismatch(_) => "region_mismatch",
            Error::UndefinedCorrelation(_) => "undefined_correlation",
            Error::Invalid(_) => "invalid",
            Error::NoConvergence { .. } => "no_convergence",
            Error::AllCollinear => "all_collinear",
            Error::TooFewClusters(_) => "too_few_clusters",
            Error::TooFewObservations { .. } => "too_few_observations",
            Error::SingularBread => "singular_bread",
            Error::MissingTreatment(_) => "missing_treatment",
            Error::MissingPeriod(_) => "missing_period",
            Error::UnknownCharacteristic(_) => "unknown_characteristic",
            Error::Unbalanced(_) => "unbalanced",
            Error::CovariatesPresent(_) => "covariates_present",
            Error::Identification(_) => "identification",
            Error::MissingSeed(_) => "missing_seed",
            Error::Config { .. } => "config",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
