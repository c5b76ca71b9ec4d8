//! WebAssembly entry points for the browser demo. Every export takes and
//! returns JSON text so the page needs no generated type bindings.

use serde::{Deserialize, Serialize};
use tradao_core::analytics::{residual_summary, ResidualSummary};
use tradao_core::backtest::{run_backtest, BacktestRecord, ExecutionConfig};
use tradao_core::market_data::MarketStore;
use tradao_core::metrics::{compute_metrics, normalize_scores, CategoryScores, MetricVector, OrientationTable};
use tradao_core::models::{HedgeRatio, ModelParams, PairsParams, ResidualSeries};
use tradao_core::portfolio_views::daily_trade_summaries;
use tradao_core::synth::{PairFixture, PairScenario};
use tradao_core::time::Period;
use wasm_bindgen::prelude::*;

/// Knobs of one pairs-trading run on the synthetic sell-off fixture.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairsKnobs {
    #[serde(default)]
    pub seed: u64,
    pub lookback: usize,
    pub diff_thre: f64,
    pub exit_thre: f64,
    #[serde(default)]
    pub cooldown: usize,
    #[serde(default = "default_size")]
    pub trade_size: f64,
}

fn default_size() -> f64 {
    10.0
}

#[derive(Debug, Serialize)]
pub struct Series {
    pub dates: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct PairsRun {
    pub symbols: [String; 2],
    pub selloff: Period,
    pub nav: Series,
    pub price_a: Series,
    pub price_b: Series,
    pub inventory_a: Series,
    pub spread: Series,
    pub band: Series,
    pub transactions: usize,
    pub metrics: MetricVector,
    pub residuals: Option<ResidualSummary>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub metrics: Vec<MetricVector>,
    pub categories: Vec<CategoryScores>,
}

fn fixture(seed: u64) -> PairFixture {
    PairScenario::selloff_case().generate(seed)
}

fn backtest(fx: &PairFixture, k: &PairsKnobs) -> Result<BacktestRecord, String> {
    let params = ModelParams::PairsTrading(PairsParams {
        symbol_a: fx.a.symbol().to_string(),
        symbol_b: fx.b.symbol().to_string(),
        lookback: k.lookback,
        coeff_1: HedgeRatio::Estimate,
        diff_thre: k.diff_thre,
        exit_thre: k.exit_thre,
        cooldown: k.cooldown,
        trade_size: k.trade_size,
    });
    let store: MarketStore = [fx.a.clone(), fx.b.clone()].into_iter().collect();
    run_backtest(&params, &store, fx.period, ExecutionConfig::default()).map_err(|e| e.to_string())
}

fn variable(record: &BacktestRecord, name: &str) -> Series {
    let found = record.variable_series.iter().find(|v| v.name == name);
    let mut out = Series { dates: Vec::new(), values: Vec::new() };
    for p in found.map(|v| v.values.as_slice()).unwrap_or_default() {
        out.dates.push(p.0.date().to_string());
        out.values.push(p.1);
    }
    out
}

/// Runs one pairs configuration and returns everything the page plots.
pub fn pairs_run(knobs: &str) -> Result<String, String> {
    let k: PairsKnobs = serde_json::from_str(knobs).map_err(|e| e.to_string())?;
    let fx = fixture(k.seed);
    let record = backtest(&fx, &k)?;
    let dated = |pts: &mut dyn Iterator<Item = (String, f64)>| {
        let (dates, values) = pts.unzip();
        Series { dates, values }
    };
    let closes = |s: &tradao_core::market_data::MarketSeries| {
        dated(&mut s.points().iter().map(|p| (p.timestamp.date().to_string(), p.close)))
    };
    let inventory = daily_trade_summaries(&record, fx.a.symbol(), None, None).map_err(|e| e.to_string())?;
    let run = PairsRun {
        symbols: [fx.a.symbol().to_string(), fx.b.symbol().to_string()],
        selloff: fx.shocks[0],
        nav: dated(&mut record.nav_series.iter().map(|d| (d.0.to_string(), d.1))),
        price_a: closes(&fx.a),
        price_b: closes(&fx.b),
        inventory_a: dated(&mut inventory.iter().map(|d| (d.date.to_string(), d.outstanding_inventory))),
        spread: variable(&record, "spread"),
        band: variable(&record, "diff_thre"),
        transactions: record.transactions.len(),
        metrics: compute_metrics(&record),
        residuals: residual_summary(&record.residuals, 20).ok(),
    };
    serde_json::to_string(&run).map_err(|e| e.to_string())
}

/// Runs several configurations on one fixture and scores them against each
/// other; the first entry plays the parent.
pub fn compare_runs(knobs: &str) -> Result<String, String> {
    let list: Vec<PairsKnobs> = serde_json::from_str(knobs).map_err(|e| e.to_string())?;
    let Some(first) = list.first() else {
        return Err("no configurations given".into());
    };
    let fx = fixture(first.seed);
    let metrics = list
        .iter()
        .map(|k| backtest(&fx, k).map(|r| compute_metrics(&r)))
        .collect::<Result<Vec<_>, _>>()?;
    let scores = normalize_scores(&metrics, &OrientationTable::default()).map_err(|e| e.to_string())?;
    let out = Comparison { metrics, categories: scores.iter().map(|s| s.categories).collect() };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Durbin-Watson, runs test and histogram for pasted residuals separated by
/// commas, whitespace or newlines.
pub fn residual_check(text: &str, bins: usize) -> Result<String, String> {
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("`{s}` is not a number")))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = residual_summary(&ResidualSeries { values }, bins).map_err(|e| e.to_string())?;
    serde_json::to_string(&summary).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = pairsRun)]
pub fn pairs_run_js(knobs: &str) -> Result<String, JsError> {
    pairs_run(knobs).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = compareRuns)]
pub fn compare_runs_js(knobs: &str) -> Result<String, JsError> {
    compare_runs(knobs).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = residualCheck)]
pub fn residual_check_js(text: &str, bins: usize) -> Result<String, JsError> {
    residual_check(text, bins).map_err(|e| JsError::new(&e))
}
