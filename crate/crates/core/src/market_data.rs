//! Instrument price histories: CSV ingestion, validation, alignment and
//! daily resampling.
//!
//! The on-disk format is a plain CSV with the exact header
//! `timestamp,open,high,low,close,volume`, timestamps in ISO-8601 UTC.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::time::{DatedValue, Period, Timestamp};

pub const CSV_HEADER: [&str; 6] = ["timestamp", "open", "high", "low", "close", "volume"];

#[derive(Debug, thiserror::Error)]
pub enum MarketDataError {
    #[error("cannot read market file: {0}")]
    Io(#[from] std::io::Error),
    #[error("market file is empty")]
    EmptyFile,
    #[error("header must be `timestamp,open,high,low,close,volume`, found `{0}`")]
    BadHeader(String),
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: OHLC invariant violated ({reason})")]
    OhlcViolation { line: u64, reason: String },
    #[error("duplicate timestamp {timestamp}")]
    NonMonotonicTime { timestamp: Timestamp },
    #[error("timestamps finer than hourly are not supported (first offender {0})")]
    UnsupportedGranularity(Timestamp),
    #[error("series have different granularities")]
    GranularityMismatch,
    #[error("series share no timestamps")]
    EmptyIntersection,
    #[error("at least two values are required")]
    TooShort,
    #[error("value at index {index} is not positive")]
    NonPositiveValue { index: usize },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("no observations of `{0}` fall inside the requested period")]
    EmptyPeriod(String),
    #[error("invalid symbol `{0}`: use letters, digits, `.`, `_` or `-`")]
    InvalidSymbol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Daily,
    Hourly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub timestamp: Timestamp,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl PricePoint {
    /// Checks the OHLC ordering and positivity constraints, returning a reason on failure.
    pub fn check(&self) -> Result<(), String> {
        for (name, v) in [("open", self.open), ("high", self.high), ("low", self.low), ("close", self.close)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(format!("{name} must be a positive finite price, got {v}"));
            }
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err(format!("volume must be non-negative, got {}", self.volume));
        }
        if self.low > self.high {
            return Err(format!("low {} > high {}", self.low, self.high));
        }
        if self.open < self.low || self.open > self.high {
            return Err(format!("open {} outside [low {}, high {}]", self.open, self.low, self.high));
        }
        if self.close < self.low || self.close > self.high {
            return Err(format!("close {} outside [low {}, high {}]", self.close, self.low, self.high));
        }
        Ok(())
    }

    /// A bar whose four prices all equal `price`.
    pub fn flat(timestamp: Timestamp, price: f64, volume: f64) -> Self {
        PricePoint { timestamp, open: price, high: price, low: price, close: price, volume }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSeries {
    symbol: String,
    granularity: Granularity,
    points: Vec<PricePoint>,
}

pub fn validate_symbol(symbol: &str) -> Result<(), MarketDataError> {
    let ok = !symbol.is_empty()
        && symbol.len() <= 64
        && symbol.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(MarketDataError::InvalidSymbol(symbol.to_string()))
    }
}

fn infer_granularity(points: &[PricePoint]) -> Result<Granularity, MarketDataError> {
    if let Some(p) = points.iter().find(|p| !p.timestamp.is_on_the_hour()) {
        return Err(MarketDataError::UnsupportedGranularity(p.timestamp));
    }
    if points.iter().all(|p| p.timestamp.is_midnight()) {
        Ok(Granularity::Daily)
    } else {
        Ok(Granularity::Hourly)
    }
}

impl MarketSeries {
    /// Builds a series from points that are already strictly time-ordered.
    /// Granularity is inferred: midnight-only timestamps are daily, on-the-hour
    /// timestamps hourly; anything finer is rejected.
    pub fn new(symbol: impl Into<String>, points: Vec<PricePoint>) -> Result<Self, MarketDataError> {
        let symbol = symbol.into();
        validate_symbol(&symbol)?;
        if points.is_empty() {
            return Err(MarketDataError::EmptyFile);
        }
        for (i, p) in points.iter().enumerate() {
            p.check().map_err(|reason| MarketDataError::OhlcViolation { line: i as u64 + 2, reason })?;
        }
        for w in points.windows(2) {
            if w[1].timestamp <= w[0].timestamp {
                return Err(MarketDataError::NonMonotonicTime { timestamp: w[1].timestamp });
            }
        }
        let granularity = infer_granularity(&points)?;
        Ok(MarketSeries { symbol, granularity, points })
    }

    /// Convenience constructor for daily close-only series (open = high = low = close).
    pub fn from_daily_closes(
        symbol: impl Into<String>,
        start: NaiveDate,
        closes: &[f64],
    ) -> Result<Self, MarketDataError> {
        let points = closes
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let day = start + chrono::Duration::days(i as i64);
                PricePoint::flat(Timestamp::from_date(day), c, 0.0)
            })
            .collect();
        MarketSeries::new(symbol, points)
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn points(&self) -> &[PricePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.close).collect()
    }

    pub fn timestamps(&self) -> Vec<Timestamp> {
        self.points.iter().map(|p| p.timestamp).collect()
    }

    pub fn first_date(&self) -> NaiveDate {
        self.points[0].timestamp.date()
    }

    pub fn last_date(&self) -> NaiveDate {
        self.points[self.points.len() - 1].timestamp.date()
    }

    /// Restricts the series to points whose calendar date lies in `period`.
    pub fn slice(&self, period: &Period) -> Result<MarketSeries, MarketDataError> {
        let points: Vec<_> = self.points.iter().filter(|p| period.contains_instant(p.timestamp)).copied().collect();
        if points.is_empty() {
            return Err(MarketDataError::EmptyPeriod(self.symbol.clone()));
        }
        Ok(MarketSeries { symbol: self.symbol.clone(), granularity: self.granularity, points })
    }

    /// Last close of each calendar day.
    pub fn daily_closes(&self) -> Vec<DatedValue> {
        let mut out: Vec<DatedValue> = Vec::new();
        for p in &self.points {
            let day = p.timestamp.date();
            match out.last_mut() {
                Some(last) if last.0 == day => last.1 = p.close,
                _ => out.push(DatedValue(day, p.close)),
            }
        }
        out
    }

    fn restricted_to(&self, keep: &BTreeSet<Timestamp>) -> MarketSeries {
        MarketSeries {
            symbol: self.symbol.clone(),
            granularity: self.granularity,
            points: self.points.iter().filter(|p| keep.contains(&p.timestamp)).copied().collect(),
        }
    }
}

fn parse_field(record: &csv::StringRecord, idx: usize, line: u64) -> Result<f64, MarketDataError> {
    let raw = record.get(idx).unwrap_or("");
    let value: f64 = raw.trim().parse().map_err(|_| MarketDataError::MalformedRow {
        line,
        reason: format!("{} `{raw}` is not a number", CSV_HEADER[idx]),
    })?;
    if !value.is_finite() {
        return Err(MarketDataError::MalformedRow { line, reason: format!("{} `{raw}` is not finite", CSV_HEADER[idx]) });
    }
    Ok(value)
}

/// Parses market CSV text. Rows may arrive in any order; they are sorted by
/// timestamp and duplicate timestamps are rejected.
pub fn parse_market_csv<R: Read>(reader: R, symbol: &str) -> Result<MarketSeries, MarketDataError> {
    validate_symbol(symbol)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(MarketDataError::EmptyFile),
        Some(r) => r.map_err(|e| MarketDataError::MalformedRow { line: 1, reason: e.to_string() })?,
    };
    let header_fields: Vec<&str> = header.iter().collect();
    if header_fields != CSV_HEADER {
        return Err(MarketDataError::BadHeader(header_fields.join(",")));
    }

    let mut rows: Vec<(u64, PricePoint)> = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| MarketDataError::MalformedRow { line, reason: e.to_string() })?;
        if rec.len() == 1 && rec.get(0).is_some_and(|f| f.trim().is_empty()) {
            continue;
        }
        if rec.len() != CSV_HEADER.len() {
            return Err(MarketDataError::MalformedRow {
                line,
                reason: format!("expected 6 fields, found {}", rec.len()),
            });
        }
        let timestamp: Timestamp = rec[0]
            .parse()
            .map_err(|e: crate::time::TimestampParseError| MarketDataError::MalformedRow { line, reason: e.to_string() })?;
        let point = PricePoint {
            timestamp,
            open: parse_field(&rec, 1, line)?,
            high: parse_field(&rec, 2, line)?,
            low: parse_field(&rec, 3, line)?,
            close: parse_field(&rec, 4, line)?,
            volume: parse_field(&rec, 5, line)?,
        };
        point.check().map_err(|reason| MarketDataError::OhlcViolation { line, reason })?;
        rows.push((line, point));
    }
    if rows.is_empty() {
        return Err(MarketDataError::EmptyFile);
    }
    rows.sort_by_key(|(_, p)| p.timestamp);
    if let Some(w) = rows.windows(2).find(|w| w[0].1.timestamp == w[1].1.timestamp) {
        return Err(MarketDataError::NonMonotonicTime { timestamp: w[1].1.timestamp });
    }
    let points: Vec<PricePoint> = rows.into_iter().map(|(_, p)| p).collect();
    let granularity = infer_granularity(&points)?;
    Ok(MarketSeries { symbol: symbol.to_string(), granularity, points })
}

pub fn load_market_csv(path: impl AsRef<Path>, symbol: &str) -> Result<MarketSeries, MarketDataError> {
    let file = File::open(path)?;
    parse_market_csv(std::io::BufReader::new(file), symbol)
}

/// Writes a series in the canonical CSV format. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_market_csv<W: Write>(series: &MarketSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", CSV_HEADER.join(","))?;
    for p in &series.points {
        writeln!(out, "{},{},{},{},{},{}", p.timestamp, p.open, p.high, p.low, p.close, p.volume)?;
    }
    Ok(())
}

/// Restricts both series to their common timestamps, preserving order.
pub fn align_series(a: &MarketSeries, b: &MarketSeries) -> Result<(MarketSeries, MarketSeries), MarketDataError> {
    if a.granularity != b.granularity {
        return Err(MarketDataError::GranularityMismatch);
    }
    let ta: BTreeSet<Timestamp> = a.points.iter().map(|p| p.timestamp).collect();
    let common: BTreeSet<Timestamp> = b.points.iter().map(|p| p.timestamp).filter(|t| ta.contains(t)).collect();
    if common.is_empty() {
        return Err(MarketDataError::EmptyIntersection);
    }
    Ok((a.restricted_to(&common), b.restricted_to(&common)))
}

/// Aligns any number of series on their common timestamps.
pub fn align_all(series: &[&MarketSeries]) -> Result<Vec<MarketSeries>, MarketDataError> {
    let Some(first) = series.first() else {
        return Ok(Vec::new());
    };
    if series.iter().any(|s| s.granularity != first.granularity) {
        return Err(MarketDataError::GranularityMismatch);
    }
    let mut common: BTreeSet<Timestamp> = first.points.iter().map(|p| p.timestamp).collect();
    for s in &series[1..] {
        let ts: BTreeSet<Timestamp> = s.points.iter().map(|p| p.timestamp).collect();
        common = common.intersection(&ts).copied().collect();
    }
    if common.is_empty() {
        return Err(MarketDataError::EmptyIntersection);
    }
    Ok(series.iter().map(|s| s.restricted_to(&common)).collect())
}

/// `r_t = v_t / v_{t-1} - 1`.
pub fn simple_returns(values: &[f64]) -> Result<Vec<f64>, MarketDataError> {
    if values.len() < 2 {
        return Err(MarketDataError::TooShort);
    }
    if let Some(index) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(MarketDataError::NonPositiveValue { index });
    }
    Ok(values.windows(2).map(|w| w[1] / w[0] - 1.0).collect())
}

/// In-memory collection of market series keyed by symbol.
#[derive(Debug, Clone, Default)]
pub struct MarketStore {
    series: BTreeMap<String, MarketSeries>,
}

impl MarketStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, series: MarketSeries) -> Option<MarketSeries> {
        self.series.insert(series.symbol.clone(), series)
    }

    pub fn get(&self, symbol: &str) -> Result<&MarketSeries, MarketDataError> {
        self.series.get(symbol).ok_or_else(|| MarketDataError::UnknownSymbol(symbol.to_string()))
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.series.contains_key(symbol)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &MarketSeries> {
        self.series.values()
    }
}

impl FromIterator<MarketSeries> for MarketStore {
    fn from_iter<T: IntoIterator<Item = MarketSeries>>(iter: T) -> Self {
        let mut store = MarketStore::new();
        for s in iter {
            store.insert(s);
        }
        store
    }
}
