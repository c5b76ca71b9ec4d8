//! Performance measures, category scores and cross-instance normalization.
//!
//! Conventions: 252 trading days per year, zero risk-free rate, sample
//! (n − 1) standard deviation, arithmetic-mean annualized return. A measure
//! that cannot be computed is carried as [`MetricValue::Absent`] with the
//! reason, never as a sentinel number.

use serde::{Deserialize, Serialize};

use crate::backtest::{round_trips, BacktestRecord, RoundTrip};
use crate::market_data::{simple_returns, MarketDataError};
use crate::stats::{mean, negligible_spread, sample_std, sorted_quantile};

pub const TRADING_DAYS: f64 = 252.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, thiserror::Error)]
pub enum MetricError {
    #[error("series is empty")]
    EmptySeries,
    #[error("series is too short")]
    TooShort,
    #[error("returns have zero variance")]
    ZeroVariance,
    #[error("no negative returns, downside deviation is zero")]
    NoDownside,
    #[error("no completed round trips")]
    NoTrades,
    #[error("NAV must be positive")]
    NonPositiveNav,
    #[error("trading calendar is empty")]
    EmptyPeriod,
    #[error("instance set is empty")]
    EmptyInstanceSet,
}

/// `{"value": x}` or `{"absent": "ZeroVariance"}` on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricValue {
    Value(f64),
    Absent(MetricError),
}

impl MetricValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            MetricValue::Value(v) => Some(*v),
            MetricValue::Absent(_) => None,
        }
    }
}

impl From<Result<f64, MetricError>> for MetricValue {
    fn from(r: Result<f64, MetricError>) -> Self {
        match r {
            Ok(v) => MetricValue::Value(v),
            Err(e) => MetricValue::Absent(e),
        }
    }
}

/// Identifies a measure. The first nine, in declaration order, are the
/// parallel-coordinates axes: higher-is-better ones first, then the four
/// lower-is-better ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricId {
    Yield,
    Sharpe,
    WinRate,
    Sortino,
    Var99,
    Md,
    AvgDd,
    MaxDd,
    Vol,
    Activeness,
}

pub const PARALLEL_AXES: [MetricId; 9] = [
    MetricId::Yield,
    MetricId::Sharpe,
    MetricId::WinRate,
    MetricId::Sortino,
    MetricId::Var99,
    MetricId::Md,
    MetricId::AvgDd,
    MetricId::MaxDd,
    MetricId::Vol,
];

pub const ALL_METRICS: [MetricId; 10] = [
    MetricId::Yield,
    MetricId::Sharpe,
    MetricId::WinRate,
    MetricId::Sortino,
    MetricId::Var99,
    MetricId::Md,
    MetricId::AvgDd,
    MetricId::MaxDd,
    MetricId::Vol,
    MetricId::Activeness,
];

impl MetricId {
    /// Field name in the JSON encoding of [`MetricVector`].
    pub fn key(self) -> &'static str {
        match self {
            MetricId::Yield => "yield_ann",
            MetricId::Sharpe => "sharpe",
            MetricId::WinRate => "win_rate",
            MetricId::Sortino => "sortino",
            MetricId::Var99 => "var99",
            MetricId::Md => "md",
            MetricId::AvgDd => "avg_dd_days",
            MetricId::MaxDd => "max_dd_days",
            MetricId::Vol => "vol_ann",
            MetricId::Activeness => "activeness",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MetricId::Yield => "Yield",
            MetricId::Sharpe => "Sharpe",
            MetricId::WinRate => "WinRate",
            MetricId::Sortino => "Sortino",
            MetricId::Var99 => "VaR99",
            MetricId::Md => "MD",
            MetricId::AvgDd => "AvgDD",
            MetricId::MaxDd => "MaxDD",
            MetricId::Vol => "Vol",
            MetricId::Activeness => "Activeness",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherIsBetter,
    LowerIsBetter,
}

/// Which direction counts as "better" for each measure.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationTable(pub Vec<(MetricId, Orientation)>);

impl Default for OrientationTable {
    fn default() -> Self {
        use Orientation::*;
        OrientationTable(
            ALL_METRICS
                .iter()
                .map(|&m| {
                    let o = match m {
                        MetricId::Md | MetricId::AvgDd | MetricId::MaxDd | MetricId::Vol => LowerIsBetter,
                        _ => HigherIsBetter,
                    };
                    (m, o)
                })
                .collect(),
        )
    }
}

impl OrientationTable {
    pub fn get(&self, id: MetricId) -> Orientation {
        self.0.iter().find(|(m, _)| *m == id).map(|(_, o)| *o).unwrap_or(Orientation::HigherIsBetter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub yield_ann: MetricValue,
    pub md: MetricValue,
    pub sharpe: MetricValue,
    pub sortino: MetricValue,
    pub max_dd_days: MetricValue,
    pub avg_dd_days: MetricValue,
    pub var99: MetricValue,
    pub vol_ann: MetricValue,
    pub win_rate: MetricValue,
    /// Transactions per trading day.
    pub activeness: MetricValue,
}

impl MetricVector {
    pub fn get(&self, id: MetricId) -> MetricValue {
        match id {
            MetricId::Yield => self.yield_ann,
            MetricId::Sharpe => self.sharpe,
            MetricId::WinRate => self.win_rate,
            MetricId::Sortino => self.sortino,
            MetricId::Var99 => self.var99,
            MetricId::Md => self.md,
            MetricId::AvgDd => self.avg_dd_days,
            MetricId::MaxDd => self.max_dd_days,
            MetricId::Vol => self.vol_ann,
            MetricId::Activeness => self.activeness,
        }
    }

    pub fn get_mut(&mut self, id: MetricId) -> &mut MetricValue {
        match id {
            MetricId::Yield => &mut self.yield_ann,
            MetricId::Sharpe => &mut self.sharpe,
            MetricId::WinRate => &mut self.win_rate,
            MetricId::Sortino => &mut self.sortino,
            MetricId::Var99 => &mut self.var99,
            MetricId::Md => &mut self.md,
            MetricId::AvgDd => &mut self.avg_dd_days,
            MetricId::MaxDd => &mut self.max_dd_days,
            MetricId::Vol => &mut self.vol_ann,
            MetricId::Activeness => &mut self.activeness,
        }
    }
}

pub fn annualized_yield(returns: &[f64]) -> Result<f64, MetricError> {
    if returns.is_empty() {
        return Err(MetricError::EmptySeries);
    }
    Ok(mean(returns) * TRADING_DAYS)
}

fn check_nav(nav: &[f64]) -> Result<(), MetricError> {
    if nav.is_empty() {
        return Err(MetricError::EmptySeries);
    }
    if nav.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(MetricError::NonPositiveNav);
    }
    Ok(())
}

/// Largest fractional decline from a running peak.
pub fn max_drawdown(nav: &[f64]) -> Result<f64, MetricError> {
    check_nav(nav)?;
    let mut peak = nav[0];
    let mut worst = 0.0_f64;
    for &v in nav {
        peak = peak.max(v);
        worst = worst.max((peak - v) / peak);
    }
    Ok(worst)
}

fn check_len(returns: &[f64]) -> Result<(), MetricError> {
    if returns.len() < 2 {
        Err(MetricError::TooShort)
    } else {
        Ok(())
    }
}

pub fn sharpe(returns: &[f64]) -> Result<f64, MetricError> {
    check_len(returns)?;
    let sd = sample_std(returns);
    if negligible_spread(sd, returns) {
        return Err(MetricError::ZeroVariance);
    }
    Ok(mean(returns) / sd * TRADING_DAYS.sqrt())
}

/// Downside deviation is `√(mean over all t of min(r_t, 0)²)`.
pub fn sortino(returns: &[f64]) -> Result<f64, MetricError> {
    check_len(returns)?;
    let dd = (returns.iter().map(|r| r.min(0.0).powi(2)).sum::<f64>() / returns.len() as f64).sqrt();
    if dd == 0.0 {
        return Err(MetricError::NoDownside);
    }
    Ok(mean(returns) / dd * TRADING_DAYS.sqrt())
}

/// One spell below a running peak, indices into the daily NAV series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawdownEpisode {
    pub peak_index: usize,
    /// Index where the peak is regained, or the last index if never.
    pub end_index: usize,
    pub recovered: bool,
    pub days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawdownDurations {
    pub max_dd_days: usize,
    pub avg_dd_days: f64,
    pub episodes: Vec<DrawdownEpisode>,
}

/// An episode starts the day after a peak is left and ends the day the peak
/// is first regained; its length counts entries from the peak to that day.
/// A spell still open at the end counts up to the last day.
pub fn drawdown_durations(nav: &[f64]) -> Result<DrawdownDurations, MetricError> {
    check_nav(nav)?;
    let mut episodes = Vec::new();
    let mut peak = nav[0];
    let mut peak_index = 0;
    let mut in_drawdown = false;
    for (i, &v) in nav.iter().enumerate().skip(1) {
        if v >= peak {
            if in_drawdown {
                episodes.push(DrawdownEpisode { peak_index, end_index: i, recovered: true, days: i - peak_index });
                in_drawdown = false;
            }
            peak = v;
            peak_index = i;
        } else {
            in_drawdown = true;
        }
    }
    if in_drawdown {
        let last = nav.len() - 1;
        episodes.push(DrawdownEpisode { peak_index, end_index: last, recovered: false, days: last - peak_index });
    }
    let max_dd_days = episodes.iter().map(|e| e.days).max().unwrap_or(0);
    let avg_dd_days = if episodes.is_empty() {
        0.0
    } else {
        episodes.iter().map(|e| e.days as f64).sum::<f64>() / episodes.len() as f64
    };
    Ok(DrawdownDurations { max_dd_days, avg_dd_days, episodes })
}

/// Empirical 1% quantile of daily returns with linear interpolation between
/// order statistics. Signed, so higher is better.
pub fn var99(returns: &[f64]) -> Result<f64, MetricError> {
    check_len(returns)?;
    let mut sorted = returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted_quantile(&sorted, 0.01))
}

pub fn volatility(returns: &[f64]) -> Result<f64, MetricError> {
    check_len(returns)?;
    let sd = sample_std(returns);
    if negligible_spread(sd, returns) {
        return Ok(0.0);
    }
    Ok(sd * TRADING_DAYS.sqrt())
}

/// Share of round trips with strictly positive PnL.
pub fn win_rate(trips: &[RoundTrip]) -> Result<f64, MetricError> {
    if trips.is_empty() {
        return Err(MetricError::NoTrades);
    }
    Ok(trips.iter().filter(|t| t.realized_pnl > 0.0).count() as f64 / trips.len() as f64)
}

/// Transactions per trading day.
pub fn activeness(record: &BacktestRecord) -> Result<f64, MetricError> {
    if record.nav_series.is_empty() {
        return Err(MetricError::EmptyPeriod);
    }
    Ok(record.transactions.len() as f64 / record.nav_series.len() as f64)
}

fn from_market(e: MarketDataError) -> MetricError {
    match e {
        MarketDataError::NonPositiveValue { .. } => MetricError::NonPositiveNav,
        _ => MetricError::TooShort,
    }
}

pub fn compute_metrics(record: &BacktestRecord) -> MetricVector {
    let nav = record.nav_values();
    let returns = simple_returns(&nav).map_err(from_market);
    let on_returns = |f: fn(&[f64]) -> Result<f64, MetricError>| -> MetricValue {
        returns.as_ref().map_err(|e| *e).and_then(|r| f(r)).into()
    };
    let durations = drawdown_durations(&nav);
    MetricVector {
        yield_ann: on_returns(annualized_yield),
        md: max_drawdown(&nav).into(),
        sharpe: on_returns(sharpe),
        sortino: on_returns(sortino),
        max_dd_days: durations.as_ref().map(|d| d.max_dd_days as f64).map_err(|e| *e).into(),
        avg_dd_days: durations.as_ref().map(|d| d.avg_dd_days).map_err(|e| *e).into(),
        var99: on_returns(var99),
        vol_ann: on_returns(volatility),
        win_rate: win_rate(&round_trips(&record.transactions)).into(),
        activeness: activeness(record).into(),
    }
}

/// The six radar-chart categories, each in [0, 100].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryScores {
    pub activeness: f64,
    pub consistency: f64,
    pub prediction: f64,
    pub profitability: f64,
    pub recovery: f64,
    pub robustness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Activeness,
    Consistency,
    Prediction,
    Profitability,
    Recovery,
    Robustness,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Activeness,
        Category::Consistency,
        Category::Prediction,
        Category::Profitability,
        Category::Recovery,
        Category::Robustness,
    ];

    pub fn members(self) -> &'static [MetricId] {
        match self {
            Category::Profitability => &[MetricId::Yield, MetricId::Md],
            Category::Consistency => &[MetricId::Sharpe, MetricId::Sortino],
            Category::Recovery => &[MetricId::MaxDd, MetricId::AvgDd],
            Category::Robustness => &[MetricId::Var99, MetricId::Vol],
            Category::Prediction => &[MetricId::WinRate],
            Category::Activeness => &[MetricId::Activeness],
        }
    }
}

impl CategoryScores {
    pub fn get(&self, c: Category) -> f64 {
        match c {
            Category::Activeness => self.activeness,
            Category::Consistency => self.consistency,
            Category::Prediction => self.prediction,
            Category::Profitability => self.profitability,
            Category::Recovery => self.recovery,
            Category::Robustness => self.robustness,
        }
    }
}

/// Per-metric scores in [0, 100], keyed like [`MetricVector`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub yield_ann: f64,
    pub md: f64,
    pub sharpe: f64,
    pub sortino: f64,
    pub max_dd_days: f64,
    pub avg_dd_days: f64,
    pub var99: f64,
    pub vol_ann: f64,
    pub win_rate: f64,
    pub activeness: f64,
}

impl MetricScores {
    pub fn get(&self, id: MetricId) -> f64 {
        match id {
            MetricId::Yield => self.yield_ann,
            MetricId::Sharpe => self.sharpe,
            MetricId::WinRate => self.win_rate,
            MetricId::Sortino => self.sortino,
            MetricId::Var99 => self.var99,
            MetricId::Md => self.md,
            MetricId::AvgDd => self.avg_dd_days,
            MetricId::MaxDd => self.max_dd_days,
            MetricId::Vol => self.vol_ann,
            MetricId::Activeness => self.activeness,
        }
    }

    fn set(&mut self, id: MetricId, v: f64) {
        match id {
            MetricId::Yield => self.yield_ann = v,
            MetricId::Sharpe => self.sharpe = v,
            MetricId::WinRate => self.win_rate = v,
            MetricId::Sortino => self.sortino = v,
            MetricId::Var99 => self.var99 = v,
            MetricId::Md => self.md = v,
            MetricId::AvgDd => self.avg_dd_days = v,
            MetricId::MaxDd => self.max_dd_days = v,
            MetricId::Vol => self.vol_ann = v,
            MetricId::Activeness => self.activeness = v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceScores {
    pub metrics: MetricScores,
    pub categories: CategoryScores,
}

/// Min-max scales each metric across the instance set onto [0, 100], with
/// 100 always meaning "best" under `orientation`. Absent values are left out
/// of the range and score 0; a metric whose range collapses scores 50.
/// Category scores average their member metrics.
pub fn normalize_scores(
    instances: &[MetricVector],
    orientation: &OrientationTable,
) -> Result<Vec<InstanceScores>, MetricError> {
    if instances.is_empty() {
        return Err(MetricError::EmptyInstanceSet);
    }
    let zero = MetricScores {
        yield_ann: 0.0,
        md: 0.0,
        sharpe: 0.0,
        sortino: 0.0,
        max_dd_days: 0.0,
        avg_dd_days: 0.0,
        var99: 0.0,
        vol_ann: 0.0,
        win_rate: 0.0,
        activeness: 0.0,
    };
    let mut scores = vec![zero; instances.len()];
    for id in ALL_METRICS {
        let present: Vec<f64> = instances.iter().filter_map(|m| m.get(id).value()).collect();
        let Some(lo) = present.iter().copied().reduce(f64::min) else { continue };
        let hi = present.iter().copied().fold(lo, f64::max);
        for (s, m) in scores.iter_mut().zip(instances) {
            let Some(v) = m.get(id).value() else { continue };
            let score = if hi == lo {
                50.0
            } else {
                let frac = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
                match orientation.get(id) {
                    Orientation::HigherIsBetter => 100.0 * frac,
                    Orientation::LowerIsBetter => 100.0 * (1.0 - frac),
                }
            };
            s.set(id, score);
        }
    }
    Ok(scores
        .into_iter()
        .map(|metrics| {
            let cat = |c: Category| {
                let m = c.members();
                m.iter().map(|&id| metrics.get(id)).sum::<f64>() / m.len() as f64
            };
            InstanceScores {
                metrics,
                categories: CategoryScores {
                    activeness: cat(Category::Activeness),
                    consistency: cat(Category::Consistency),
                    prediction: cat(Category::Prediction),
                    profitability: cat(Category::Profitability),
                    recovery: cat(Category::Recovery),
                    robustness: cat(Category::Robustness),
                },
            }
        })
        .collect())
}
