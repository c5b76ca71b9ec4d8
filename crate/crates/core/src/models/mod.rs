//! Parameterized trading models.
//!
//! Each model turns aligned price series into trade [`Signal`]s, a set of
//! named internal [`VariableSeries`] and the model's own fitting residuals.
//! All models are deterministic functions of `(series, params)`.

mod moving_average;
mod ols;
mod pairs;
mod regression;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::market_data::{validate_symbol, MarketDataError, MarketSeries};
use crate::time::{TimedValue, Timestamp};

pub use moving_average::{ma_signals, moving_average};
pub use ols::{ols_fit, OlsFit};
pub use pairs::{pairs_signals, pairs_state, spread_series, PairsState};
pub use regression::regression_signals;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("model needs more than {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("regression needs more than {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("regressors must have the same length as the response")]
    LengthMismatch,
    #[error("spread has zero variance in the window ending {0}")]
    ZeroSpreadVariance(Timestamp),
    #[error("input series are not aligned on common timestamps")]
    NotAligned,
    #[error("expected series for {expected:?}")]
    WrongInputs { expected: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ma,
    Pairs,
    Regression,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ma => "ma",
            ModelKind::Pairs => "pairs",
            ModelKind::Regression => "regression",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Moving-average crossover on a single instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaParams {
    pub symbol: String,
    pub window_fast: usize,
    pub window_slow: usize,
    pub trade_size: f64,
}

/// Hedge ratio of a pairs trade: either estimated by rolling OLS or pinned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HedgeRatio {
    Estimate,
    Fixed(f64),
}

impl Serialize for HedgeRatio {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            HedgeRatio::Estimate => serializer.serialize_str("estimate"),
            HedgeRatio::Fixed(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for HedgeRatio {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(HedgeRatio::Fixed(v)),
            Raw::Text(s) if s == "estimate" => Ok(HedgeRatio::Estimate),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "coeff_1 must be a number or \"estimate\", got \"{s}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairsParams {
    pub symbol_a: String,
    pub symbol_b: String,
    pub lookback: usize,
    pub coeff_1: HedgeRatio,
    pub diff_thre: f64,
    pub exit_thre: f64,
    pub cooldown: usize,
    pub trade_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionParams {
    pub target: String,
    pub factors: Vec<String>,
    pub lookback: usize,
    pub signal_thre: f64,
    pub trade_size: f64,
}

/// JSON form: `{"model":"pairs", ...fields}`; likewise `"ma"` and `"regression"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum ModelParams {
    #[serde(rename = "ma")]
    MovingAverage(MaParams),
    #[serde(rename = "pairs")]
    PairsTrading(PairsParams),
    #[serde(rename = "regression")]
    LinearRegression(RegressionParams),
}

/// A parameter value as shown on an evolution glyph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Category(String),
}

impl ParamValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            ParamValue::Number(v) => Some(*v),
            ParamValue::Category(_) => None,
        }
    }
}

fn check(cond: bool, msg: &str) -> Result<(), ModelError> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::InvalidParams(msg.to_string()))
    }
}

fn check_symbol(symbol: &str) -> Result<(), ModelError> {
    validate_symbol(symbol).map_err(|e| ModelError::InvalidParams(e.to_string()))
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::MovingAverage(_) => ModelKind::Ma,
            ModelParams::PairsTrading(_) => ModelKind::Pairs,
            ModelParams::LinearRegression(_) => ModelKind::Regression,
        }
    }

    /// Instruments the model reads, in the order `run_model` expects them.
    pub fn symbols(&self) -> Vec<String> {
        match self {
            ModelParams::MovingAverage(p) => vec![p.symbol.clone()],
            ModelParams::PairsTrading(p) => vec![p.symbol_a.clone(), p.symbol_b.clone()],
            ModelParams::LinearRegression(p) => {
                let mut v = vec![p.target.clone()];
                v.extend(p.factors.iter().cloned());
                v
            }
        }
    }

    /// Strategy key: model kind plus instrument set. Instances sharing a key
    /// share a parameter schema and live in one evolution tree.
    pub fn strategy_id(&self) -> String {
        let mut parts = vec![self.kind().as_str().to_string()];
        parts.extend(self.symbols());
        parts.join("-")
    }

    pub fn trade_size(&self) -> f64 {
        match self {
            ModelParams::MovingAverage(p) => p.trade_size,
            ModelParams::PairsTrading(p) => p.trade_size,
            ModelParams::LinearRegression(p) => p.trade_size,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let size = self.trade_size();
        check(size.is_finite() && size > 0.0, "trade_size must be positive")?;
        match self {
            ModelParams::MovingAverage(p) => {
                check_symbol(&p.symbol)?;
                check(p.window_fast >= 2, "window_fast must be at least 2")?;
                check(p.window_fast < p.window_slow, "window_fast must be below window_slow")?;
            }
            ModelParams::PairsTrading(p) => {
                check_symbol(&p.symbol_a)?;
                check_symbol(&p.symbol_b)?;
                check(p.symbol_a != p.symbol_b, "pairs need two distinct symbols")?;
                check(p.lookback >= 2, "lookback must be at least 2")?;
                check(p.diff_thre.is_finite() && p.exit_thre.is_finite(), "thresholds must be finite")?;
                check(p.exit_thre >= 0.0, "exit_thre must be non-negative")?;
                check(p.diff_thre > p.exit_thre, "diff_thre must exceed exit_thre")?;
                if let HedgeRatio::Fixed(c) = p.coeff_1 {
                    check(c.is_finite() && c != 0.0, "a fixed coeff_1 must be finite and non-zero")?;
                }
            }
            ModelParams::LinearRegression(p) => {
                check_symbol(&p.target)?;
                check(!p.factors.is_empty(), "at least one factor is required")?;
                for f in &p.factors {
                    check_symbol(f)?;
                    check(f != &p.target, "factors must differ from the target")?;
                }
                let mut sorted = p.factors.clone();
                sorted.sort();
                sorted.dedup();
                check(sorted.len() == p.factors.len(), "factors must be distinct")?;
                check(p.lookback >= 2, "lookback must be at least 2")?;
                check(p.lookback > p.factors.len() + 1, "lookback must exceed the number of factors + 1")?;
                check(p.signal_thre.is_finite() && p.signal_thre >= 0.0, "signal_thre must be non-negative")?;
            }
        }
        Ok(())
    }

    /// Tunable parameters in fixed ring order for the model kind.
    pub fn segments(&self) -> Vec<(&'static str, ParamValue)> {
        use ParamValue::Number;
        match self {
            ModelParams::MovingAverage(p) => vec![
                ("window_fast", Number(p.window_fast as f64)),
                ("window_slow", Number(p.window_slow as f64)),
                ("trade_size", Number(p.trade_size)),
            ],
            ModelParams::PairsTrading(p) => vec![
                ("lookback", Number(p.lookback as f64)),
                (
                    "coeff_1",
                    match p.coeff_1 {
                        HedgeRatio::Estimate => ParamValue::Category("estimate".into()),
                        HedgeRatio::Fixed(c) => Number(c),
                    },
                ),
                ("diff_thre", Number(p.diff_thre)),
                ("exit_thre", Number(p.exit_thre)),
                ("cooldown", Number(p.cooldown as f64)),
                ("trade_size", Number(p.trade_size)),
            ],
            ModelParams::LinearRegression(p) => vec![
                ("lookback", Number(p.lookback as f64)),
                ("signal_thre", Number(p.signal_thre)),
                ("trade_size", Number(p.trade_size)),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Buy,
    Sell,
    /// Flatten the open position in the symbol; `size` is its magnitude.
    Close,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub timestamp: Timestamp,
    pub symbol: String,
    pub direction: Direction,
    pub size: f64,
}

/// A named, time-indexed model variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSeries {
    pub name: String,
    pub values: Vec<TimedValue>,
}

impl VariableSeries {
    pub fn new(name: impl Into<String>, timestamps: &[Timestamp], values: &[f64]) -> Self {
        VariableSeries {
            name: name.into(),
            values: timestamps.iter().zip(values).map(|(&t, &v)| TimedValue(t, v)).collect(),
        }
    }

    pub fn raw(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.1).collect()
    }

    pub fn timestamps(&self) -> Vec<Timestamp> {
        self.values.iter().map(|v| v.0).collect()
    }
}

/// Model residuals in time order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResidualSeries {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub signals: Vec<Signal>,
    pub variables: Vec<VariableSeries>,
    pub residuals: ResidualSeries,
}

/// Runs the model on series already aligned on common timestamps, given in
/// the order of [`ModelParams::symbols`].
pub fn run_model(params: &ModelParams, series: &[MarketSeries]) -> Result<ModelOutput, ModelError> {
    params.validate()?;
    let expected = params.symbols();
    if series.len() != expected.len() || series.iter().zip(&expected).any(|(s, e)| s.symbol() != e) {
        return Err(ModelError::WrongInputs { expected });
    }
    match params {
        ModelParams::MovingAverage(p) => ma_signals(&series[0], p),
        ModelParams::PairsTrading(p) => {
            let state = pairs_state(&series[0], &series[1], p)?;
            let signals = pairs_signals(&state, p);
            Ok(ModelOutput { signals, variables: state.variables(), residuals: state.residuals.clone() })
        }
        ModelParams::LinearRegression(p) => regression_signals(&series[0], &series[1..], p),
    }
}

/// Converts a desired signed position into a buy/sell signal, if it differs
/// from the current one.
pub(crate) fn rebalance(timestamp: Timestamp, symbol: &str, current: f64, target: f64) -> Option<Signal> {
    let delta = target - current;
    if delta == 0.0 {
        return None;
    }
    Some(Signal {
        timestamp,
        symbol: symbol.to_string(),
        direction: if delta > 0.0 { Direction::Buy } else { Direction::Sell },
        size: delta.abs(),
    })
}

pub(crate) fn ensure_aligned(series: &[&MarketSeries]) -> Result<(), ModelError> {
    let Some(first) = series.first() else { return Ok(()) };
    let ts = first.timestamps();
    if series.iter().skip(1).any(|s| s.timestamps() != ts) {
        return Err(ModelError::NotAligned);
    }
    Ok(())
}

impl From<MarketDataError> for ModelError {
    fn from(e: MarketDataError) -> Self {
        ModelError::InvalidParams(e.to_string())
    }
}
