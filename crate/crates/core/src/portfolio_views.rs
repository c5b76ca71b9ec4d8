//! Cash usage, trading history and market overlays derived from a record.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backtest::{BacktestRecord, Side};
use crate::market_data::MarketStore;
use crate::time::DatedValue;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ViewError {
    #[error("invalid period: {0}")]
    InvalidPeriod(String),
    #[error("danger level must be finite and not above the warning level")]
    InvalidThresholds,
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiquidityThresholds {
    pub warning_level: f64,
    pub danger_level: f64,
}

impl LiquidityThresholds {
    pub const DEFAULT_WARNING_SHARE: f64 = 0.20;
    pub const DEFAULT_DANGER_SHARE: f64 = 0.05;

    /// 20% and 5% of the starting capital.
    pub fn for_capital(initial_capital: f64) -> Self {
        LiquidityThresholds {
            warning_level: Self::DEFAULT_WARNING_SHARE * initial_capital,
            danger_level: Self::DEFAULT_DANGER_SHARE * initial_capital,
        }
    }

    pub fn validate(&self) -> Result<(), ViewError> {
        if self.warning_level.is_finite() && self.danger_level.is_finite() && self.danger_level <= self.warning_level {
            Ok(())
        } else {
            Err(ViewError::InvalidThresholds)
        }
    }

    pub fn classify(&self, cash: f64) -> CashStatus {
        if cash < self.danger_level {
            CashStatus::Danger
        } else if cash < self.warning_level {
            CashStatus::Warning
        } else {
            CashStatus::Ok
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CashStatus {
    Ok,
    Warning,
    Danger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CashUsagePoint {
    pub date: NaiveDate,
    pub nav: f64,
    pub available_cash: f64,
    pub status: CashStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CashUsage {
    pub initial_capital: f64,
    pub thresholds: LiquidityThresholds,
    pub points: Vec<CashUsagePoint>,
}

/// Resolves optional bounds against `[lo, hi]`; the result must overlap it.
fn resolve_range(
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
    lo: NaiveDate,
    hi: NaiveDate,
) -> Result<(NaiveDate, NaiveDate), ViewError> {
    let from = from.unwrap_or(lo);
    let to = to.unwrap_or(hi);
    if from > to {
        return Err(ViewError::InvalidPeriod(format!("{from} is after {to}")));
    }
    if to < lo || from > hi {
        return Err(ViewError::InvalidPeriod(format!("{from}..{to} lies outside {lo}..{hi}")));
    }
    Ok((from, to))
}

fn record_range(record: &BacktestRecord) -> Result<(NaiveDate, NaiveDate), ViewError> {
    match (record.nav_series.first(), record.nav_series.last()) {
        (Some(a), Some(b)) => Ok((a.0, b.0)),
        _ => Err(ViewError::InvalidPeriod("record has no trading days".into())),
    }
}

pub fn cash_usage(
    record: &BacktestRecord,
    thresholds: LiquidityThresholds,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
) -> Result<CashUsage, ViewError> {
    thresholds.validate()?;
    let (lo, hi) = record_range(record)?;
    let (from, to) = resolve_range(from, to, lo, hi)?;
    let points = record
        .nav_series
        .iter()
        .zip(&record.cash_series)
        .filter(|(n, _)| (from..=to).contains(&n.0))
        .map(|(n, c)| CashUsagePoint { date: n.0, nav: n.1, available_cash: c.1, status: thresholds.classify(c.1) })
        .collect();
    Ok(CashUsage { initial_capital: record.initial_capital, thresholds, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BreachLevel {
    Warning,
    Danger,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiquidityBreach {
    pub level: BreachLevel,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub days: usize,
}

/// Maximal runs of consecutive points sharing a non-ok status.
pub fn liquidity_breaches(points: &[CashUsagePoint]) -> Vec<LiquidityBreach> {
    let mut out: Vec<LiquidityBreach> = Vec::new();
    let mut prev = CashStatus::Ok;
    for p in points {
        let level = match p.status {
            CashStatus::Ok => None,
            CashStatus::Warning => Some(BreachLevel::Warning),
            CashStatus::Danger => Some(BreachLevel::Danger),
        };
        if let Some(level) = level {
            match out.last_mut() {
                Some(run) if prev == p.status => {
                    run.end_date = p.date;
                    run.days += 1;
                }
                _ => out.push(LiquidityBreach { level, start_date: p.date, end_date: p.date, days: 1 }),
            }
        }
        prev = p.status;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyTradeSummary {
    pub date: NaiveDate,
    pub symbol: String,
    pub trade_count: usize,
    /// Units bought minus units sold.
    pub net_volume: f64,
    /// Volume-weighted price over both sides; absent on days without trades.
    pub vwap: Option<f64>,
    pub buy_high: Option<f64>,
    pub buy_low: Option<f64>,
    pub sell_high: Option<f64>,
    pub sell_low: Option<f64>,
    /// Signed position at the end of the day.
    pub outstanding_inventory: f64,
}

#[derive(Default)]
struct DayFills {
    count: usize,
    net: f64,
    notional: f64,
    volume: f64,
    lo: f64,
    hi: f64,
    buy: Option<(f64, f64)>,
    sell: Option<(f64, f64)>,
    quantities: Vec<f64>,
}

fn widen(range: &mut Option<(f64, f64)>, price: f64) {
    *range = Some(match *range {
        Some((lo, hi)) => (lo.min(price), hi.max(price)),
        None => (price, price),
    });
}

/// One summary per trading day in range. Days without fills for `symbol`
/// still carry the outstanding inventory. A symbol the record never refers
/// to yields an empty list.
pub fn daily_trade_summaries(
    record: &BacktestRecord,
    symbol: &str,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
) -> Result<Vec<DailyTradeSummary>, ViewError> {
    let (lo, hi) = record_range(record)?;
    let (from, to) = resolve_range(from, to, lo, hi)?;
    if !record.symbols().iter().any(|s| s == symbol) {
        return Ok(Vec::new());
    }

    let mut days: BTreeMap<NaiveDate, DayFills> =
        record.nav_series.iter().map(|d| (d.0, DayFills::default())).collect();
    for t in record.transactions.iter().filter(|t| t.symbol == symbol) {
        let day = days.entry(t.timestamp.date()).or_default();
        if day.count == 0 {
            day.lo = t.price;
            day.hi = t.price;
        }
        day.count += 1;
        day.net += t.quantity();
        day.quantities.push(t.quantity());
        day.notional += t.price * t.size;
        day.volume += t.size;
        day.lo = day.lo.min(t.price);
        day.hi = day.hi.max(t.price);
        match t.side {
            Side::Buy => widen(&mut day.buy, t.price),
            Side::Sell => widen(&mut day.sell, t.price),
        }
    }

    let mut inventory = 0.0;
    let mut out = Vec::new();
    for (date, day) in days {
        // Fills are summed one by one, as the engine books them.
        for q in &day.quantities {
            inventory += q;
        }
        if date < from || date > to {
            continue;
        }
        out.push(DailyTradeSummary {
            date,
            symbol: symbol.to_string(),
            trade_count: day.count,
            net_volume: day.net,
            vwap: (day.count > 0).then(|| (day.notional / day.volume).clamp(day.lo, day.hi)),
            buy_high: day.buy.map(|r| r.1),
            buy_low: day.buy.map(|r| r.0),
            sell_high: day.sell.map(|r| r.1),
            sell_low: day.sell.map(|r| r.0),
            outstanding_inventory: inventory,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlaySeries {
    pub symbol: String,
    /// Daily closes rebased to 100 at the first in-range close.
    pub points: Vec<DatedValue>,
}

pub fn market_overlay(
    store: &MarketStore,
    symbols: &[String],
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
) -> Result<Vec<OverlaySeries>, ViewError> {
    if let (Some(f), Some(t)) = (from, to) {
        if f > t {
            return Err(ViewError::InvalidPeriod(format!("{f} is after {t}")));
        }
    }
    symbols
        .iter()
        .map(|symbol| {
            let series = store.get(symbol).map_err(|_| ViewError::UnknownSymbol(symbol.clone()))?;
            let closes: Vec<DatedValue> = series
                .daily_closes()
                .into_iter()
                .filter(|d| from.is_none_or(|f| d.0 >= f) && to.is_none_or(|t| d.0 <= t))
                .collect();
            let base = closes
                .first()
                .ok_or_else(|| ViewError::InvalidPeriod(format!("no `{symbol}` prices in range")))?
                .1;
            Ok(OverlaySeries {
                symbol: symbol.clone(),
                points: closes.iter().map(|d| DatedValue(d.0, d.1 / base * 100.0)).collect(),
            })
        })
        .collect()
}
