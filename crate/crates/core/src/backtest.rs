//! Deterministic execution of model signals against historical bars.
//!
//! Fills happen at the bar close with a per-unit commission and no slippage.
//! The book is marked to market at the last bar of every calendar day and
//! all open positions are force-closed at the final bar.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::market_data::{align_all, MarketDataError, MarketStore};
use crate::models::{run_model, Direction, ModelError, ModelParams, ResidualSeries, Signal, VariableSeries};
use crate::time::{DatedValue, Period, Timestamp};

#[derive(Debug, thiserror::Error)]
pub enum BacktestError {
    #[error("symbol `{0}` is not available in the market store")]
    MissingSymbol(String),
    #[error("no bars fall inside the requested period")]
    EmptyPeriod,
    #[error("invalid execution config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Market(MarketDataError),
}

impl From<MarketDataError> for BacktestError {
    fn from(e: MarketDataError) -> Self {
        match e {
            MarketDataError::UnknownSymbol(s) => BacktestError::MissingSymbol(s),
            MarketDataError::EmptyPeriod(_) | MarketDataError::EmptyIntersection => BacktestError::EmptyPeriod,
            other => BacktestError::Market(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionConfig {
    pub initial_capital: f64,
    #[serde(default)]
    pub commission_per_unit: f64,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        ExecutionConfig { initial_capital: 1_000_000.0, commission_per_unit: 0.0 }
    }
}

impl ExecutionConfig {
    pub fn validate(&self) -> Result<(), BacktestError> {
        if !(self.initial_capital.is_finite() && self.initial_capital > 0.0) {
            return Err(BacktestError::InvalidConfig("initial_capital must be positive".into()));
        }
        if !(self.commission_per_unit.is_finite() && self.commission_per_unit >= 0.0) {
            return Err(BacktestError::InvalidConfig("commission_per_unit must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Buy => 1.0,
            Side::Sell => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub timestamp: Timestamp,
    pub symbol: String,
    pub side: Side,
    pub size: f64,
    pub price: f64,
    #[serde(default)]
    pub commission: f64,
    /// `−price·size` for buys, `+price·size` for sells, less commission.
    pub cash_delta: f64,
}

impl Transaction {
    pub fn new(timestamp: Timestamp, symbol: impl Into<String>, side: Side, size: f64, price: f64, commission_per_unit: f64) -> Self {
        let commission = commission_per_unit * size;
        Transaction {
            timestamp,
            symbol: symbol.into(),
            side,
            size,
            price,
            commission,
            cash_delta: -side.sign() * price * size - commission,
        }
    }

    /// Signed change in inventory.
    pub fn quantity(&self) -> f64 {
        self.side.sign() * self.size
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PortfolioState {
    pub cash: f64,
    pub positions: BTreeMap<String, f64>,
}

impl PortfolioState {
    pub fn with_cash(cash: f64) -> Self {
        PortfolioState { cash, positions: BTreeMap::new() }
    }

    pub fn position(&self, symbol: &str) -> f64 {
        self.positions.get(symbol).copied().unwrap_or(0.0)
    }

    /// `cash + Σ position·mark`. Symbols without a mark contribute nothing.
    pub fn nav(&self, marks: &HashMap<&str, f64>) -> f64 {
        self.cash
            + self
                .positions
                .iter()
                .map(|(s, q)| q * marks.get(s.as_str()).copied().unwrap_or(0.0))
                .sum::<f64>()
    }

    fn apply_in_place(&mut self, t: &Transaction) {
        self.cash += t.cash_delta;
        let entry = self.positions.entry(t.symbol.clone()).or_insert(0.0);
        *entry += t.quantity();
        if *entry == 0.0 {
            self.positions.remove(&t.symbol);
        }
    }
}

/// Applies one fill. Negative cash (leverage) and negative positions
/// (shorts) are legal states.
pub fn apply_transaction(state: &PortfolioState, t: &Transaction) -> PortfolioState {
    let mut next = state.clone();
    next.apply_in_place(t);
    next
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestRecord {
    pub instance_id: String,
    pub params: ModelParams,
    pub period: Period,
    pub initial_capital: f64,
    #[serde(default)]
    pub commission_per_unit: f64,
    pub transactions: Vec<Transaction>,
    pub nav_series: Vec<DatedValue>,
    pub cash_series: Vec<DatedValue>,
    pub variable_series: Vec<VariableSeries>,
    pub residuals: ResidualSeries,
}

impl BacktestRecord {
    pub fn nav_values(&self) -> Vec<f64> {
        self.nav_series.iter().map(DatedValue::value).collect()
    }

    pub fn trading_days(&self) -> usize {
        self.nav_series.len()
    }

    /// Every symbol the record refers to, sorted and deduplicated.
    pub fn symbols(&self) -> Vec<String> {
        let mut out = self.params.symbols();
        out.extend(self.transactions.iter().map(|t| t.symbol.clone()));
        out.sort();
        out.dedup();
        out
    }

    /// Structural checks for records arriving from outside the engine.
    pub fn validate(&self) -> Result<(), String> {
        self.params.validate().map_err(|e| e.to_string())?;
        if !(self.initial_capital.is_finite() && self.initial_capital > 0.0) {
            return Err("initial_capital must be positive".into());
        }
        if self.period.is_empty() {
            return Err("period start is after its end".into());
        }
        if self.nav_series.is_empty() {
            return Err("nav_series is empty".into());
        }
        if self.nav_series.len() != self.cash_series.len()
            || self.nav_series.iter().zip(&self.cash_series).any(|(n, c)| n.0 != c.0)
        {
            return Err("nav_series and cash_series must share the trading calendar".into());
        }
        if self.nav_series.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err("series dates must be strictly increasing".into());
        }
        if self.nav_series.iter().any(|d| !self.period.contains(d.0)) {
            return Err("series dates must lie inside the period".into());
        }
        let nav0 = self.nav_series[0].1;
        if (nav0 - self.initial_capital).abs() > 1e-9 * self.initial_capital {
            return Err("nav_series must start at initial_capital".into());
        }
        let finite = |v: f64| v.is_finite();
        if !self.nav_series.iter().chain(&self.cash_series).all(|d| finite(d.1)) {
            return Err("series values must be finite".into());
        }
        if self.transactions.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
            return Err("transactions must be time-ordered".into());
        }
        for t in &self.transactions {
            if !(t.price.is_finite() && t.price > 0.0 && t.size.is_finite() && t.size > 0.0 && t.cash_delta.is_finite()) {
                return Err(format!("transaction at {} has a non-positive price or size", t.timestamp));
            }
        }
        if !self.residuals.values.iter().all(|v| v.is_finite()) {
            return Err("residuals must be finite".into());
        }
        let mut names: Vec<&str> = self.variable_series.iter().map(|v| v.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err("variable names must be unique".into());
        }
        Ok(())
    }
}

/// Runs `params` over `period` and returns the full record. The record's
/// `instance_id` is left empty for the caller to assign.
///
/// The first trading day is the reference mark (`nav_series[0]` equals the
/// initial capital), so signals falling on it are not executed. With daily
/// bars no model emits signals that early.
pub fn run_backtest(
    params: &ModelParams,
    market: &MarketStore,
    period: Period,
    config: ExecutionConfig,
) -> Result<BacktestRecord, BacktestError> {
    params.validate()?;
    config.validate()?;
    if period.is_empty() {
        return Err(BacktestError::EmptyPeriod);
    }
    let symbols = params.symbols();
    let sliced = symbols
        .iter()
        .map(|s| market.get(s).map_err(BacktestError::from)?.slice(&period).map_err(BacktestError::from))
        .collect::<Result<Vec<_>, _>>()?;
    let aligned = align_all(&sliced.iter().collect::<Vec<_>>())?;
    let output = run_model(params, &aligned)?;

    let timeline = aligned[0].timestamps();
    let closes: Vec<Vec<f64>> = aligned.iter().map(|s| s.closes()).collect();
    let bar_of: HashMap<Timestamp, usize> = timeline.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let first_day = timeline[0].date();

    let mut by_bar: Vec<Vec<&Signal>> = vec![Vec::new(); timeline.len()];
    for sig in &output.signals {
        let bar = *bar_of.get(&sig.timestamp).ok_or_else(|| {
            BacktestError::Model(ModelError::InvalidParams(format!("signal at unknown bar {}", sig.timestamp)))
        })?;
        if sig.timestamp.date() != first_day {
            by_bar[bar].push(sig);
        }
    }

    let mut state = PortfolioState::with_cash(config.initial_capital);
    let mut transactions = Vec::new();
    let mut nav_series = Vec::new();
    let mut cash_series = Vec::new();
    let last = timeline.len() - 1;
    let price_at = |bar: usize, symbol: &str| -> f64 {
        let idx = symbols.iter().position(|s| s == symbol).expect("signal symbol belongs to the model");
        closes[idx][bar]
    };

    for (bar, &ts) in timeline.iter().enumerate() {
        let mut fill = |state: &mut PortfolioState, symbol: &str, side: Side, size: f64| {
            let t = Transaction::new(ts, symbol, side, size, price_at(bar, symbol), config.commission_per_unit);
            state.apply_in_place(&t);
            transactions.push(t);
        };
        for sig in &by_bar[bar] {
            match sig.direction {
                Direction::Buy => fill(&mut state, &sig.symbol, Side::Buy, sig.size),
                Direction::Sell => fill(&mut state, &sig.symbol, Side::Sell, sig.size),
                Direction::Close => {
                    let held = state.position(&sig.symbol);
                    if held > 0.0 {
                        fill(&mut state, &sig.symbol, Side::Sell, held);
                    } else if held < 0.0 {
                        fill(&mut state, &sig.symbol, Side::Buy, -held);
                    }
                }
            }
        }
        if bar == last {
            let open: Vec<(String, f64)> = state.positions.iter().map(|(s, q)| (s.clone(), *q)).collect();
            for (symbol, held) in open {
                let side = if held > 0.0 { Side::Sell } else { Side::Buy };
                fill(&mut state, &symbol, side, held.abs());
            }
        }
        let end_of_day = bar == last || timeline[bar + 1].date() != ts.date();
        if end_of_day {
            let marks: HashMap<&str, f64> =
                symbols.iter().enumerate().map(|(i, s)| (s.as_str(), closes[i][bar])).collect();
            nav_series.push(DatedValue(ts.date(), state.nav(&marks)));
            cash_series.push(DatedValue(ts.date(), state.cash));
        }
    }

    Ok(BacktestRecord {
        instance_id: String::new(),
        params: params.clone(),
        period,
        initial_capital: config.initial_capital,
        commission_per_unit: config.commission_per_unit,
        transactions,
        nav_series,
        cash_series,
        variable_series: output.variables,
        residuals: output.residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TradeDirection {
    Long,
    Short,
}

/// One FIFO-matched open/close lot pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub symbol: String,
    pub direction: TradeDirection,
    pub size: f64,
    pub entry_time: Timestamp,
    pub exit_time: Timestamp,
    pub entry_price: f64,
    pub exit_price: f64,
    /// Price PnL less the matched share of both fills' commission.
    pub realized_pnl: f64,
}

struct Lot {
    side: Side,
    remaining: f64,
    price: f64,
    time: Timestamp,
    commission_per_unit: f64,
}

/// FIFO matching of opposing fills per symbol. Unmatched remainders are dropped.
pub fn round_trips(transactions: &[Transaction]) -> Vec<RoundTrip> {
    let mut open: BTreeMap<&str, VecDeque<Lot>> = BTreeMap::new();
    let mut trips = Vec::new();
    for t in transactions {
        let fill_cpu = if t.size > 0.0 { t.commission / t.size } else { 0.0 };
        let book = open.entry(t.symbol.as_str()).or_default();
        let mut qty = t.size;
        while qty > 0.0 {
            let Some(front) = book.front_mut().filter(|lot| lot.side != t.side) else { break };
            let matched = qty.min(front.remaining);
            let (direction, gross) = match front.side {
                Side::Buy => (TradeDirection::Long, (t.price - front.price) * matched),
                Side::Sell => (TradeDirection::Short, (front.price - t.price) * matched),
            };
            trips.push(RoundTrip {
                symbol: t.symbol.clone(),
                direction,
                size: matched,
                entry_time: front.time,
                exit_time: t.timestamp,
                entry_price: front.price,
                exit_price: t.price,
                realized_pnl: gross - (front.commission_per_unit + fill_cpu) * matched,
            });
            front.remaining -= matched;
            qty -= matched;
            if front.remaining <= 0.0 {
                book.pop_front();
            }
        }
        if qty > 0.0 {
            book.push_back(Lot { side: t.side, remaining: qty, price: t.price, time: t.timestamp, commission_per_unit: fill_cpu });
        }
    }
    trips
}
