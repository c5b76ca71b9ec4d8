use super::{ensure_aligned, Direction, HedgeRatio, ModelError, PairsParams, ResidualSeries, Signal, VariableSeries};
use crate::market_data::MarketSeries;
use crate::stats::{mean, sample_std};
use crate::time::Timestamp;

/// Rolling pairs statistics from the first bar where a full lookback window exists.
///
/// For the window ending at `t` the hedge ratio is the OLS slope of `a` on `b`
/// over the window (or the fixed override). The in-window spread
/// `a_j − coeff_1[t]·b_j` supplies the rolling mean and sample deviation used
/// to standardize `spread[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairsState {
    pub symbol_a: String,
    pub symbol_b: String,
    pub timestamps: Vec<Timestamp>,
    pub coeff_1: Vec<f64>,
    pub spread: Vec<f64>,
    pub spread_z: Vec<f64>,
    /// Entry band in spread units: `diff_thre` times the rolling deviation.
    pub entry_band: Vec<f64>,
    pub residuals: ResidualSeries,
}

impl PairsState {
    pub fn variables(&self) -> Vec<VariableSeries> {
        vec![
            VariableSeries::new("coeff_1", &self.timestamps, &self.coeff_1),
            VariableSeries::new("diff_thre", &self.timestamps, &self.entry_band),
            VariableSeries::new("spread", &self.timestamps, &self.spread),
            VariableSeries::new("spread_z", &self.timestamps, &self.spread_z),
        ]
    }
}

/// `a[t] − coeff·b[t]` element-wise.
pub fn spread_series(a: &[f64], b: &[f64], coeff: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - coeff * y).collect()
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Dispersion below this fraction of the data's magnitude is treated as zero.
const DEGENERATE_REL: f64 = 1e-12;

fn rolling_slope(a: &[f64], b: &[f64]) -> Result<f64, ModelError> {
    let (ma, mb) = (mean(a), mean(b));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in b.iter().zip(a) {
        sxy += (x - mb) * (y - ma);
        sxx += (x - mb) * (x - mb);
    }
    if sxx.sqrt() <= DEGENERATE_REL * max_abs(b) * (b.len() as f64).sqrt() {
        return Err(ModelError::RankDeficient);
    }
    Ok(sxy / sxx)
}

pub fn pairs_state(a: &MarketSeries, b: &MarketSeries, params: &PairsParams) -> Result<PairsState, ModelError> {
    ensure_aligned(&[a, b])?;
    let lookback = params.lookback;
    let n = a.len();
    if n <= lookback {
        return Err(ModelError::InsufficientData { needed: lookback, got: n });
    }
    let pa = a.closes();
    let pb = b.closes();
    let all_ts = a.timestamps();

    let count = n - lookback + 1;
    let mut state = PairsState {
        symbol_a: a.symbol().to_string(),
        symbol_b: b.symbol().to_string(),
        timestamps: all_ts[lookback - 1..].to_vec(),
        coeff_1: Vec::with_capacity(count),
        spread: Vec::with_capacity(count),
        spread_z: Vec::with_capacity(count),
        entry_band: Vec::with_capacity(count),
        residuals: ResidualSeries { values: Vec::with_capacity(count) },
    };

    for end in lookback - 1..n {
        let wa = &pa[end + 1 - lookback..=end];
        let wb = &pb[end + 1 - lookback..=end];
        let coeff = match params.coeff_1 {
            HedgeRatio::Fixed(c) => c,
            HedgeRatio::Estimate => rolling_slope(wa, wb)?,
        };
        let window_spread = spread_series(wa, wb, coeff);
        let m = mean(&window_spread);
        let sd = sample_std(&window_spread);
        if sd <= DEGENERATE_REL * (max_abs(wa) + coeff.abs() * max_abs(wb)) {
            return Err(ModelError::ZeroSpreadVariance(all_ts[end]));
        }
        let s = window_spread[lookback - 1];
        state.coeff_1.push(coeff);
        state.spread.push(s);
        state.spread_z.push((s - m) / sd);
        state.entry_band.push(params.diff_thre * sd);
        state.residuals.values.push(s - m);
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Book {
    Flat,
    /// Long `a`, short `b` (spread expected to rise).
    LongSpread { size_b: f64 },
    /// Short `a`, long `b` (spread expected to fall).
    ShortSpread { size_b: f64 },
}

fn leg(timestamp: Timestamp, symbol: &str, direction: Direction, size: f64) -> Signal {
    Signal { timestamp, symbol: symbol.to_string(), direction, size }
}

fn opposite(d: Direction) -> Direction {
    match d {
        Direction::Buy => Direction::Sell,
        Direction::Sell => Direction::Buy,
        Direction::Close => Direction::Close,
    }
}

/// Threshold rules on the spread z-score.
///
/// * `z > diff_thre` opens a short spread: sell `trade_size` of `a`, buy
///   `coeff_1·trade_size` of `b` (sides of `b` flip when `coeff_1 < 0`).
/// * `z < −diff_thre` opens the mirrored long spread.
/// * `|z| < exit_thre` closes both legs.
/// * No entry within `cooldown` bars of the previous entry. An opposite
///   excursion while a spread is open closes it and reverses, subject to
///   the same cooldown.
///
/// Every action emits both legs at the same timestamp.
pub fn pairs_signals(state: &PairsState, params: &PairsParams) -> Vec<Signal> {
    let size_a = params.trade_size;
    let mut book = Book::Flat;
    let mut last_entry: Option<usize> = None;
    let mut out = Vec::new();

    let close_legs = |out: &mut Vec<Signal>, ts: Timestamp, size_b: f64| {
        out.push(leg(ts, &state.symbol_a, Direction::Close, size_a));
        out.push(leg(ts, &state.symbol_b, Direction::Close, size_b));
    };

    for (i, (&ts, &z)) in state.timestamps.iter().zip(&state.spread_z).enumerate() {
        if let Book::LongSpread { size_b, .. } | Book::ShortSpread { size_b, .. } = book {
            if z.abs() < params.exit_thre {
                close_legs(&mut out, ts, size_b);
                book = Book::Flat;
                continue;
            }
        }

        let wants_short = z > params.diff_thre && !matches!(book, Book::ShortSpread { .. });
        let wants_long = z < -params.diff_thre && !matches!(book, Book::LongSpread { .. });
        if !(wants_short || wants_long) {
            continue;
        }
        let cooled = last_entry.is_none_or(|last| i - last >= params.cooldown);
        let coeff = state.coeff_1[i];
        let size_b = (coeff * size_a).abs();
        if !cooled || size_b == 0.0 || !size_b.is_finite() {
            continue;
        }
        if let Book::LongSpread { size_b: open_b, .. } | Book::ShortSpread { size_b: open_b, .. } = book {
            close_legs(&mut out, ts, open_b);
        }
        // Holding +1 of `a` hedges with −coeff of `b`.
        let (a_side, hedge_side) = if wants_short {
            (Direction::Sell, Direction::Buy)
        } else {
            (Direction::Buy, Direction::Sell)
        };
        let b_side = if coeff >= 0.0 { hedge_side } else { opposite(hedge_side) };
        out.push(leg(ts, &state.symbol_a, a_side, size_a));
        out.push(leg(ts, &state.symbol_b, b_side, size_b));
        book = if wants_short { Book::ShortSpread { size_b } } else { Book::LongSpread { size_b } };
        last_entry = Some(i);
    }
    out
}
