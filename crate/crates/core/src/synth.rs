//! Seeded synthetic market data for demos, fixtures and tests.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::market_data::{MarketSeries, PricePoint};
use crate::time::{Period, Timestamp};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` consecutive weekdays starting at the first weekday on or after `start`.
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// Daily bars with the given closes; opens continue the previous close and
/// the high/low straddle both by a small random margin.
pub fn daily_bars(symbol: &str, days: &[NaiveDate], closes: &[f64], rng: &mut ChaCha8Rng) -> MarketSeries {
    let mut prev = closes[0];
    let points = days
        .iter()
        .zip(closes)
        .map(|(&d, &close)| {
            let open = prev;
            prev = close;
            let wick = 1.0 + rng.random_range(0.0..0.004);
            PricePoint {
                timestamp: Timestamp::from_date(d),
                open,
                high: open.max(close) * wick,
                low: open.min(close) / wick,
                close,
                volume: rng.random_range(1e5..1e6f64).round(),
            }
        })
        .collect();
    MarketSeries::new(symbol, points).expect("synthetic bars are valid")
}

/// Geometric random walk of `n` closes starting at `start`.
pub fn random_walk(rng: &mut ChaCha8Rng, n: usize, start: f64, drift: f64, vol: f64) -> Vec<f64> {
    let shock = Normal::new(drift, vol).expect("finite vol");
    let mut p = start;
    (0..n)
        .map(|i| {
            if i > 0 {
                p *= shock.sample(rng).exp();
            }
            p
        })
        .collect()
}

/// Two indices tied by a drifting hedge ratio and a mean-reverting spread,
/// with an optional engineered sell-off.
#[derive(Debug, Clone)]
pub struct PairScenario {
    pub symbol_a: String,
    pub symbol_b: String,
    pub start: NaiveDate,
    pub days: usize,
    pub base_b: f64,
    pub drift_b: f64,
    pub vol_b: f64,
    pub hedge_start: f64,
    pub hedge_end: f64,
    /// AR(1) coefficient of the spread noise.
    pub spread_ar: f64,
    pub spread_noise_start: f64,
    pub spread_noise_end: f64,
    /// Engineered moves, applied in order on top of the generated paths.
    pub shocks: Vec<Shock>,
}

/// Over `len` days from day `start` the two indices move by `move_a` and
/// `move_b` (e.g. −0.20 and −0.10) and keep the new level afterwards.
#[derive(Debug, Clone, Copy)]
pub struct Shock {
    pub start: usize,
    pub len: usize,
    pub move_a: f64,
    pub move_b: f64,
}

#[derive(Debug, Clone)]
pub struct PairFixture {
    pub a: MarketSeries,
    pub b: MarketSeries,
    pub period: Period,
    /// Calendar span of each shock, in the scenario's order.
    pub shocks: Vec<Period>,
}

impl Default for PairScenario {
    fn default() -> Self {
        PairScenario {
            symbol_a: "NSXUSD".into(),
            symbol_b: "SPXUSD".into(),
            start: NaiveDate::from_ymd_opt(2019, 1, 2).expect("valid date"),
            days: 500,
            base_b: 3000.0,
            drift_b: 0.0003,
            vol_b: 0.01,
            hedge_start: 2.6,
            hedge_end: 3.4,
            spread_ar: 0.9,
            spread_noise_start: 25.0,
            spread_noise_end: 25.0,
            shocks: Vec::new(),
        }
    }
}

impl PairScenario {
    /// Index pair with a one-month sell-off late in the sample: over 21
    /// trading days from day 420 the first index drops 20% and the second 10%.
    pub fn selloff_case() -> Self {
        PairScenario {
            spread_ar: 0.5,
            shocks: vec![Shock { start: 420, len: 21, move_a: -0.20, move_b: -0.10 }],
            ..PairScenario::default()
        }
    }

    pub fn generate(&self, seed: u64) -> PairFixture {
        let mut rng = rng(seed);
        let n = self.days;
        let days = business_days(self.start, n);
        let mut b = random_walk(&mut rng, n, self.base_b, self.drift_b, self.vol_b);
        let mut u = 0.0;
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let mut a: Vec<f64> = (0..n)
            .map(|t| {
                let f = if n > 1 { t as f64 / (n - 1) as f64 } else { 0.0 };
                let hedge = self.hedge_start + (self.hedge_end - self.hedge_start) * f;
                let sd = self.spread_noise_start + (self.spread_noise_end - self.spread_noise_start) * f;
                u = self.spread_ar * u + sd * unit.sample(&mut rng);
                hedge * b[t] + u
            })
            .collect();

        let shocks = self
            .shocks
            .iter()
            .map(|s| {
                let end = (s.start + s.len).min(n) - 1;
                for t in s.start..n {
                    let progress = ((t - s.start + 1) as f64 / s.len as f64).min(1.0);
                    a[t] *= (1.0 + s.move_a).powf(progress);
                    b[t] *= (1.0 + s.move_b).powf(progress);
                }
                Period::new(days[s.start], days[end])
            })
            .collect();
        for v in a.iter_mut() {
            *v = v.max(1.0);
        }

        PairFixture {
            a: daily_bars(&self.symbol_a, &days, &a, &mut rng),
            b: daily_bars(&self.symbol_b, &days, &b, &mut rng),
            period: Period::new(days[0], days[n - 1]),
            shocks,
        }
    }
}
