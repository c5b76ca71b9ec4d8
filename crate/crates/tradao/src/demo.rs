//! Seeds a store with a synthetic index pair and a three-instance evolution
//! tree: a short-lookback root, a sibling refinement, and a long-lookback
//! child that misbehaves through an engineered sell-off.

use tradao_core::backtest::ExecutionConfig;
use tradao_core::market_data::write_market_csv;
use tradao_core::models::{HedgeRatio, ModelParams, PairsParams};
use tradao_core::synth::{PairFixture, PairScenario};

use crate::error::ServiceError;
use crate::service::{InstanceResponse, RunRequest, Service};

pub const DEMO_SEED: u64 = 0;

#[derive(Debug, Clone)]
pub struct DemoTree {
    pub fixture: PairFixture,
    pub parent: InstanceResponse,
    pub sibling: InstanceResponse,
    pub child: InstanceResponse,
}

pub fn pairs(fixture: &PairFixture, lookback: usize, diff_thre: f64, exit_thre: f64, cooldown: usize) -> ModelParams {
    ModelParams::PairsTrading(PairsParams {
        symbol_a: fixture.a.symbol().to_string(),
        symbol_b: fixture.b.symbol().to_string(),
        lookback,
        coeff_1: HedgeRatio::Estimate,
        diff_thre,
        exit_thre,
        cooldown,
        trade_size: 10.0,
    })
}

fn run(
    service: &Service,
    fixture: &PairFixture,
    params: ModelParams,
    parent: Option<&InstanceResponse>,
) -> Result<InstanceResponse, ServiceError> {
    service.run_and_register(RunRequest {
        id: None,
        strategy_id: None,
        parent_id: parent.map(|p| p.instance.id.clone()),
        label: None,
        params,
        period: fixture.period,
        config: ExecutionConfig::default(),
    })
}

pub fn seed(service: &Service, seed: u64) -> Result<DemoTree, ServiceError> {
    let fixture = PairScenario::selloff_case().generate(seed);
    for series in [&fixture.a, &fixture.b] {
        let mut csv = Vec::new();
        write_market_csv(series, &mut csv).map_err(|e| ServiceError::MarketData(e.to_string()))?;
        service.ingest_market_csv(series.symbol(), &csv)?;
    }
    let parent = run(service, &fixture, pairs(&fixture, 4, 1.0, 0.5, 0), None)?;
    let sibling = run(service, &fixture, pairs(&fixture, 60, 1.5, 0.5, 5), Some(&parent))?;
    let child = run(service, &fixture, pairs(&fixture, 200, 1.0, 0.2, 0), Some(&parent))?;
    Ok(DemoTree { fixture, parent, sibling, child })
}
