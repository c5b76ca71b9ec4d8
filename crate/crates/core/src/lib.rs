//! Core engine for iterative trading-algorithm tuning: market data, trading
//! models, a deterministic backtester, performance metrics, the evolution
//! tree of algorithm instances and the diagnostics behind each analysis view.

pub mod analytics;
pub mod backtest;
pub mod evolution;
pub mod market_data;
pub mod metrics;
pub mod models;
pub mod portfolio_views;
mod stats;
pub mod synth;
pub mod time;
