//! Replays every fill of random backtests and re-marks the book daily.

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tradao_core::backtest::{run_backtest, BacktestRecord, ExecutionConfig, Side};
use tradao_core::market_data::MarketStore;
use tradao_core::models::{HedgeRatio, MaParams, ModelParams, PairsParams, RegressionParams};
use tradao_core::synth::{business_days, daily_bars, random_walk};
use tradao_core::time::Period;

use crate::Outcome;

const RUNS: u64 = 200;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn market(rng: &mut ChaCha8Rng, n: usize) -> (MarketStore, Period) {
    let days = business_days(NaiveDate::from_ymd_opt(2018, 3, 1).unwrap(), n);
    let base = random_walk(rng, n, 100.0, 0.0002, 0.012);
    let series = ["AAA", "BBB", "CCC"].iter().map(|s| {
        let beta = rng.random_range(0.5..2.0);
        let own = random_walk(rng, n, 1.0, 0.0, 0.006);
        let closes: Vec<f64> = base.iter().zip(&own).map(|(b, o)| beta * b * o).collect();
        daily_bars(s, &days, &closes, rng)
    });
    (series.collect(), Period::new(days[0], days[n - 1]))
}

fn params(rng: &mut ChaCha8Rng, model: u64) -> ModelParams {
    let trade_size = rng.random_range(1..=25) as f64;
    match model {
        0 => {
            let fast = rng.random_range(2..10);
            ModelParams::MovingAverage(MaParams {
                symbol: "AAA".into(),
                window_fast: fast,
                window_slow: rng.random_range(fast + 1..45),
                trade_size,
            })
        }
        1 => {
            let diff = rng.random_range(0.5..2.5);
            ModelParams::PairsTrading(PairsParams {
                symbol_a: "AAA".into(),
                symbol_b: "BBB".into(),
                lookback: rng.random_range(5..60),
                coeff_1: if rng.random_bool(0.7) { HedgeRatio::Estimate } else { HedgeRatio::Fixed(rng.random_range(0.5..2.0)) },
                diff_thre: diff,
                exit_thre: rng.random_range(0.0..diff / 2.0),
                cooldown: rng.random_range(0..6),
                trade_size,
            })
        }
        _ => {
            let factors = if rng.random_bool(0.5) { vec!["BBB".into()] } else { vec!["BBB".into(), "CCC".into()] };
            ModelParams::LinearRegression(RegressionParams {
                target: "AAA".into(),
                factors,
                lookback: rng.random_range(10..60),
                signal_thre: rng.random_range(0.0..0.01),
                trade_size,
            })
        }
    }
}

/// Rebuilds cash and positions from the fills alone and checks the record's
/// daily NAV and cash, then checks that each day's NAV change is exactly the
/// mark-to-market of yesterday's book plus today's fills net of commission.
fn replay(record: &BacktestRecord, store: &MarketStore, cpu: f64) -> Result<(), String> {
    let mut closes: HashMap<(String, NaiveDate), f64> = HashMap::new();
    for sym in record.symbols() {
        for p in store.get(&sym).map_err(|e| e.to_string())?.points() {
            closes.insert((sym.clone(), p.timestamp.date()), p.close);
        }
    }
    let mark = |s: &str, d: NaiveDate| closes.get(&(s.to_string(), d)).copied().ok_or(format!("no {s} close on {d}"));

    let mut cash = record.initial_capital;
    let mut book: BTreeMap<String, f64> = BTreeMap::new();
    let mut fills = record.transactions.iter().peekable();
    let mut prev: Option<(NaiveDate, f64, BTreeMap<String, f64>)> = None;
    for (t, nav_point) in record.nav_series.iter().enumerate() {
        let day = nav_point.0;
        let mut flow = 0.0;
        while let Some(f) = fills.next_if(|f| f.timestamp.date() <= day) {
            if f.timestamp.date() != day {
                return Err(format!("fill on {} is not a trading day", f.timestamp.date()));
            }
            let q = if f.side == Side::Buy { f.size } else { -f.size };
            let commission = f.size * cpu;
            cash += -q * f.price - commission;
            *book.entry(f.symbol.clone()).or_default() += q;
            flow += q * (mark(&f.symbol, day)? - f.price) - commission;
        }
        let mut nav = cash;
        for (s, q) in &book {
            nav += q * mark(s, day)?;
        }
        if !close(nav, nav_point.1) || !close(cash, record.cash_series[t].1) {
            return Err(format!("day {day}: nav {} vs replay {nav}, cash {} vs {cash}", nav_point.1, record.cash_series[t].1));
        }
        if let Some((pd, pnav, pbook)) = &prev {
            let mut carry = 0.0;
            for (s, q) in pbook {
                carry += q * (mark(s, day)? - mark(s, *pd)?);
            }
            if ((nav_point.1 - pnav) - (carry + flow)).abs() > 1e-9 * pnav {
                return Err(format!("day {day}: NAV moved {} but book and fills explain {}", nav_point.1 - pnav, carry + flow));
            }
        }
        prev = Some((day, nav_point.1, book.clone()));
    }
    if fills.next().is_some() {
        return Err("fills after the last trading day".into());
    }
    Ok(())
}

pub fn check() -> Outcome {
    let mut trades = 0;
    let mut per_model = [0usize; 3];
    for seed in 0..RUNS {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + seed);
        let n = rng.random_range(150..320);
        let (store, period) = market(&mut rng, n);
        let model = seed % 3;
        let p = params(&mut rng, model);
        let cpu = [0.0, 0.05, 1.0][rng.random_range(0..3)];
        let config = ExecutionConfig { initial_capital: rng.random_range(1e4..1e7), commission_per_unit: cpu };
        let record = run_backtest(&p, &store, period, config).map_err(|e| format!("seed {seed} {p:?}: {e}"))?;
        replay(&record, &store, cpu).map_err(|e| format!("seed {seed} ({}): {e}", p.kind()))?;
        trades += record.transactions.len();
        per_model[model as usize] += usize::from(!record.transactions.is_empty());
    }
    Ok(format!(
        "{RUNS} backtests, {trades} fills replayed; runs with trades ma/pairs/regression = {}/{}/{}",
        per_model[0], per_model[1], per_model[2]
    ))
}
