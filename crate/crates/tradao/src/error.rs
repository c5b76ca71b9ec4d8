use std::path::PathBuf;

use tradao_core::analytics::AnalyticsError;
use tradao_core::backtest::BacktestError;
use tradao_core::evolution::EvolutionError;
use tradao_core::market_data::MarketDataError;
use tradao_core::models::ModelError;
use tradao_core::portfolio_views::ViewError;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    SchemaViolation(String),
    #[error("{0}")]
    InvalidQuery(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{0}")]
    InvalidPeriod(String),
    #[error("danger level must be finite and not above the warning level")]
    InvalidThresholds,
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("unknown parent instance `{0}`")]
    UnknownParent(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("instance id `{0}` is already taken by different content")]
    DuplicateId(String),
    #[error("the strategy already has a root; pass a parent instance")]
    SecondRoot,
    #[error("{0}")]
    StrategyMismatch(String),
    #[error("bad market data: {0}")]
    MarketData(String),
    /// Model, backtest or analytics failure; `code` names the condition.
    #[error("{message}")]
    Computation { code: &'static str, message: String },
    #[error("store unavailable at {path}: {message}")]
    StoreUnavailable { path: PathBuf, message: String },
}

impl ServiceError {
    /// Machine-readable error code used in API responses.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::SchemaViolation(_) => "SchemaViolation",
            ServiceError::InvalidQuery(_) => "InvalidQuery",
            ServiceError::InvalidParams(_) => "InvalidParams",
            ServiceError::InvalidPeriod(_) => "InvalidPeriod",
            ServiceError::InvalidThresholds => "InvalidThresholds",
            ServiceError::UnknownInstance(_) => "UnknownInstance",
            ServiceError::UnknownStrategy(_) => "UnknownStrategy",
            ServiceError::UnknownParent(_) => "UnknownParent",
            ServiceError::UnknownSymbol(_) => "UnknownSymbol",
            ServiceError::DuplicateId(_) => "DuplicateId",
            ServiceError::SecondRoot => "SecondRoot",
            ServiceError::StrategyMismatch(_) => "StrategyMismatch",
            ServiceError::MarketData(_) => "InvalidMarketData",
            ServiceError::Computation { code, .. } => code,
            ServiceError::StoreUnavailable { .. } => "StoreUnavailable",
        }
    }

    pub(crate) fn store(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        ServiceError::StoreUnavailable { path: path.into(), message: err.to_string() }
    }
}

fn model_code(e: &ModelError) -> &'static str {
    match e {
        ModelError::InvalidParams(_) => "InvalidParams",
        ModelError::WindowTooLarge { .. } => "WindowTooLarge",
        ModelError::InsufficientData { .. } => "InsufficientData",
        ModelError::RankDeficient => "RankDeficient",
        ModelError::TooFewObservations { .. } => "TooFewObservations",
        ModelError::LengthMismatch => "LengthMismatch",
        ModelError::ZeroSpreadVariance(_) => "ZeroSpreadVariance",
        ModelError::NotAligned => "NotAligned",
        ModelError::WrongInputs { .. } => "WrongInputs",
    }
}

impl From<ModelError> for ServiceError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidParams(m) => ServiceError::InvalidParams(m),
            other => ServiceError::Computation { code: model_code(&other), message: other.to_string() },
        }
    }
}

impl From<MarketDataError> for ServiceError {
    fn from(e: MarketDataError) -> Self {
        match e {
            MarketDataError::UnknownSymbol(s) => ServiceError::UnknownSymbol(s),
            MarketDataError::EmptyPeriod(s) => ServiceError::InvalidPeriod(format!("no `{s}` bars in the requested period")),
            MarketDataError::EmptyIntersection => ServiceError::InvalidPeriod(e.to_string()),
            other => ServiceError::MarketData(other.to_string()),
        }
    }
}

impl From<BacktestError> for ServiceError {
    fn from(e: BacktestError) -> Self {
        match e {
            BacktestError::MissingSymbol(s) => ServiceError::UnknownSymbol(s),
            BacktestError::EmptyPeriod => ServiceError::InvalidPeriod(e.to_string()),
            BacktestError::InvalidConfig(m) => ServiceError::InvalidParams(m),
            BacktestError::Model(m) => m.into(),
            BacktestError::Market(m) => m.into(),
        }
    }
}

impl From<EvolutionError> for ServiceError {
    fn from(e: EvolutionError) -> Self {
        match e {
            EvolutionError::UnknownParent(p) => ServiceError::UnknownParent(p),
            EvolutionError::UnknownInstance(i) => ServiceError::UnknownInstance(i),
            EvolutionError::SecondRoot => ServiceError::SecondRoot,
            EvolutionError::DuplicateId(i) => ServiceError::DuplicateId(i),
            other @ (EvolutionError::ModelKindMismatch { .. } | EvolutionError::StrategyMismatch { .. }) => {
                ServiceError::StrategyMismatch(other.to_string())
            }
        }
    }
}

impl From<AnalyticsError> for ServiceError {
    fn from(e: AnalyticsError) -> Self {
        let code = match e {
            AnalyticsError::LengthMismatch => "LengthMismatch",
            AnalyticsError::TooShort => "TooShort",
            AnalyticsError::ZeroVariance => "ZeroVariance",
            AnalyticsError::WindowTooLarge { .. } => "WindowTooLarge",
            AnalyticsError::EmptyInput => "EmptyInput",
            AnalyticsError::InvalidBins => "InvalidBins",
            AnalyticsError::TooFewVariables(_) => "TooFewVariables",
            AnalyticsError::UnknownVariable(_) => "UnknownVariable",
            AnalyticsError::WrongVariableCount => "WrongVariableCount",
            AnalyticsError::AllZeroResiduals => "AllZeroResiduals",
        };
        ServiceError::Computation { code, message: e.to_string() }
    }
}

impl From<ViewError> for ServiceError {
    fn from(e: ViewError) -> Self {
        match e {
            ViewError::InvalidPeriod(m) => ServiceError::InvalidPeriod(m),
            ViewError::InvalidThresholds => ServiceError::InvalidThresholds,
            ViewError::UnknownSymbol(s) => ServiceError::UnknownSymbol(s),
        }
    }
}
