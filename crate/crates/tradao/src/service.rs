//! Operations shared by the REST API and the CLI.

use std::path::PathBuf;

use chrono::{DateTime, NaiveDate, Utc};
use parking_lot::RwLock;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tradao_core::analytics::{correlation_grid, residual_summary, CorrelationGrid, ResidualSummary, DEFAULT_BINS, DEFAULT_WINDOW};
use tradao_core::backtest::{run_backtest, BacktestRecord, ExecutionConfig};
use tradao_core::evolution::{
    glyph_data, parallel_coordinates, tree_view, AlgorithmInstance, EvolutionTree, GlyphData, NewInstance,
    ParallelCoordinates, TreeView,
};
use tradao_core::market_data::{parse_market_csv, validate_symbol, Granularity, MarketSeries, MarketStore, PricePoint};
use tradao_core::metrics::{compute_metrics, InstanceScores, MetricVector};
use tradao_core::models::{ModelKind, ModelParams};
use tradao_core::portfolio_views::{
    cash_usage, daily_trade_summaries, liquidity_breaches, market_overlay, CashUsagePoint, DailyTradeSummary,
    LiquidityBreach, LiquidityThresholds,
};
use tradao_core::time::{DatedValue, Period};

use crate::error::ServiceError;
use crate::store::{to_json_bytes, validate_id, Store};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    /// Optional client-chosen instance id.
    #[serde(default)]
    pub id: Option<String>,
    /// When given, must equal the strategy derived from `params`.
    #[serde(default)]
    pub strategy_id: Option<String>,
    #[serde(default)]
    pub parent_id: Option<String>,
    #[serde(default)]
    pub label: Option<String>,
    pub params: ModelParams,
    pub period: Period,
    #[serde(default)]
    pub config: ExecutionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResponse {
    pub instance: AlgorithmInstance,
    pub scores: InstanceScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub period: Period,
    pub initial_capital: f64,
    pub commission_per_unit: f64,
    pub trading_days: usize,
    pub transactions: usize,
    pub symbols: Vec<String>,
    pub variables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDetail {
    pub instance: AlgorithmInstance,
    pub scores: InstanceScores,
    pub glyph: GlyphData,
    pub record: RecordSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy_id: String,
    pub model_kind: ModelKind,
    pub root: Option<String>,
    pub instances: usize,
    pub created_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSummary {
    pub symbol: String,
    pub granularity: Granularity,
    pub bars: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
}

impl From<&MarketSeries> for MarketSummary {
    fn from(s: &MarketSeries) -> Self {
        MarketSummary {
            symbol: s.symbol().to_string(),
            granularity: s.granularity(),
            bars: s.len(),
            first_date: s.first_date(),
            last_date: s.last_date(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CashView {
    pub instance_id: String,
    pub initial_capital: f64,
    pub thresholds: LiquidityThresholds,
    pub points: Vec<CashUsagePoint>,
    pub breaches: Vec<LiquidityBreach>,
}

/// Content hash of the run inputs plus a random suffix, so repeated runs
/// get distinct ids while sharing a recognisable prefix.
pub fn generate_id(params: &ModelParams, period: &Period, config: &ExecutionConfig) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&(params, period, config)).expect("inputs serialize"));
    let digest = hex::encode(h.finalize());
    let suffix: u32 = rand::rng().random();
    format!("{}-{suffix:08x}", &digest[..12])
}

fn scores_of(tree: &EvolutionTree, id: &str) -> InstanceScores {
    let pos = tree.nodes().iter().position(|n| n.id == id).expect("instance is in its tree");
    tree.scores()[pos]
}

fn now() -> DateTime<Utc> {
    Utc::now()
}

/// Thread-safe façade over the store. Reads run concurrently; writes are
/// serialized by the store lock.
#[derive(Debug)]
pub struct Service {
    store: RwLock<Store>,
}

impl Service {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        Ok(Service { store: RwLock::new(Store::open(dir)?) })
    }

    pub fn data_dir(&self) -> PathBuf {
        self.store.read().root().to_path_buf()
    }

    pub fn check_integrity(&self) -> Result<(), String> {
        self.store.read().check_integrity()
    }

    pub fn ingest_market_csv(&self, symbol: &str, csv: &[u8]) -> Result<(MarketSummary, bool), ServiceError> {
        validate_symbol(symbol).map_err(|e| ServiceError::InvalidQuery(e.to_string()))?;
        let series = parse_market_csv(csv, symbol)?;
        let summary = MarketSummary::from(&series);
        let replaced = self.store.write().put_market(series)?;
        Ok((summary, replaced))
    }

    /// Registers an externally produced record. A non-empty `instance_id`
    /// is the client's id: re-sending the same record under it returns the
    /// existing instance with `created = false`.
    pub fn ingest_record(
        &self,
        mut record: BacktestRecord,
        parent_id: Option<&str>,
    ) -> Result<(InstanceResponse, bool), ServiceError> {
        record.validate().map_err(ServiceError::SchemaViolation)?;
        let client_id = (!record.instance_id.is_empty()).then(|| record.instance_id.clone());
        if let Some(id) = &client_id {
            validate_id(id)?;
        }

        let mut store = self.store.write();
        if let Some(sym) = record.symbols().into_iter().find(|s| !store.market().contains(s)) {
            return Err(ServiceError::UnknownSymbol(sym));
        }
        if let Some(id) = &client_id {
            if store.contains_instance(id) {
                let (tree, existing) = store.instance(id)?;
                let same = store.record(id).map(|r| to_json_bytes(r) == to_json_bytes(&record))?
                    && existing.parent_id.as_deref() == parent_id;
                if !same {
                    return Err(ServiceError::DuplicateId(id.clone()));
                }
                let scores = scores_of(tree, id);
                return Ok((InstanceResponse { instance: existing.clone(), scores }, false));
            }
        }
        let id = client_id.unwrap_or_else(|| {
            generate_id(
                &record.params,
                &record.period,
                &ExecutionConfig { initial_capital: record.initial_capital, commission_per_unit: record.commission_per_unit },
            )
        });
        record.instance_id = id.clone();
        let metrics = compute_metrics(&record);
        let response = Self::register(&mut store, record, metrics, parent_id, None)?;
        Ok((response, true))
    }

    /// Runs a backtest and registers the result. Nothing is persisted unless
    /// every step succeeds.
    pub fn run_and_register(&self, req: RunRequest) -> Result<InstanceResponse, ServiceError> {
        req.params.validate()?;
        let strategy = req.params.strategy_id();
        if let Some(sid) = &req.strategy_id {
            if *sid != strategy {
                return Err(ServiceError::StrategyMismatch(format!(
                    "params belong to strategy `{strategy}`, not `{sid}`"
                )));
            }
        }
        if let Some(id) = &req.id {
            validate_id(id)?;
        }

        // Compute without holding the lock.
        let (market, tree) = {
            let store = self.store.read();
            let mut market = MarketStore::new();
            for sym in req.params.symbols() {
                market.insert(store.market().get(&sym).map_err(ServiceError::from)?.clone());
            }
            (market, store.tree(&strategy).cloned().unwrap_or_else(|| EvolutionTree::for_params(&req.params)))
        };
        tree.check_insert(&req.params, req.parent_id.as_deref())?;
        let mut record = run_backtest(&req.params, &market, req.period, req.config)?;
        let metrics = compute_metrics(&record);

        let mut store = self.store.write();
        let id = match req.id {
            Some(id) if store.contains_instance(&id) => return Err(ServiceError::DuplicateId(id)),
            Some(id) => id,
            None => generate_id(&req.params, &req.period, &req.config),
        };
        record.instance_id = id;
        Self::register(&mut store, record, metrics, req.parent_id.as_deref(), req.label)
    }

    fn register(
        store: &mut Store,
        record: BacktestRecord,
        metrics: MetricVector,
        parent_id: Option<&str>,
        label: Option<String>,
    ) -> Result<InstanceResponse, ServiceError> {
        let id = record.instance_id.clone();
        if store.contains_instance(&id) {
            return Err(ServiceError::DuplicateId(id));
        }
        let mut tree = store
            .tree(&record.params.strategy_id())
            .cloned()
            .unwrap_or_else(|| EvolutionTree::for_params(&record.params));
        let instance = tree
            .add_instance(NewInstance {
                id: id.clone(),
                parent_id: parent_id.map(str::to_string),
                label,
                params: record.params.clone(),
                record_ref: id.clone(),
                metrics,
                created_at: now(),
            })?
            .clone();
        let scores = scores_of(&tree, &id);
        store.commit_instance(tree, record)?;
        Ok(InstanceResponse { instance, scores })
    }

    /// Sorted by creation time of the root, then id.
    pub fn strategies(&self) -> Vec<StrategySummary> {
        let store = self.store.read();
        let mut out: Vec<StrategySummary> = store
            .trees()
            .map(|t| StrategySummary {
                strategy_id: t.strategy_id().to_string(),
                model_kind: t.model_kind(),
                root: t.root().map(|r| r.id.clone()),
                instances: t.len(),
                created_at: t.root().map(|r| r.created_at),
            })
            .collect();
        out.sort_by(|a, b| (a.created_at, &a.strategy_id).cmp(&(b.created_at, &b.strategy_id)));
        out
    }

    pub fn tree(&self, strategy_id: &str) -> Result<TreeView, ServiceError> {
        let store = self.store.read();
        let tree = store.tree(strategy_id).ok_or_else(|| ServiceError::UnknownStrategy(strategy_id.to_string()))?;
        Ok(tree_view(tree))
    }

    pub fn tree_model(&self, strategy_id: &str) -> Result<EvolutionTree, ServiceError> {
        let store = self.store.read();
        store.tree(strategy_id).cloned().ok_or_else(|| ServiceError::UnknownStrategy(strategy_id.to_string()))
    }

    pub fn instance(&self, id: &str) -> Result<InstanceDetail, ServiceError> {
        let store = self.store.read();
        let (tree, inst) = store.instance(id)?;
        let record = store.record(&inst.record_ref)?;
        Ok(InstanceDetail {
            instance: inst.clone(),
            scores: scores_of(tree, id),
            glyph: glyph_data(tree, id)?,
            record: RecordSummary {
                period: record.period,
                initial_capital: record.initial_capital,
                commission_per_unit: record.commission_per_unit,
                trading_days: record.trading_days(),
                transactions: record.transactions.len(),
                symbols: record.symbols(),
                variables: record.variable_series.iter().map(|v| v.name.clone()).collect(),
            },
        })
    }

    pub fn record(&self, id: &str) -> Result<BacktestRecord, ServiceError> {
        let store = self.store.read();
        let (_, inst) = store.instance(id)?;
        store.record(&inst.record_ref).cloned()
    }

    pub fn parallel(&self, id: &str) -> Result<ParallelCoordinates, ServiceError> {
        let store = self.store.read();
        let (tree, _) = store.instance(id)?;
        Ok(parallel_coordinates(tree, id)?)
    }

    pub fn correlation(
        &self,
        id: &str,
        window: Option<usize>,
        bins: Option<usize>,
        vars: Option<Vec<String>>,
    ) -> Result<CorrelationGrid, ServiceError> {
        let store = self.store.read();
        let (_, inst) = store.instance(id)?;
        let own = &store.record(&inst.record_ref)?.variable_series;
        let parent = match &inst.parent_id {
            Some(p) => Some(&store.record(&store.instance(p)?.1.record_ref)?.variable_series),
            None => None,
        };
        Ok(correlation_grid(
            own,
            parent.map(|v| v.as_slice()),
            window.unwrap_or(DEFAULT_WINDOW),
            bins.unwrap_or(DEFAULT_BINS),
            vars.as_deref(),
        )?)
    }

    pub fn residuals(&self, id: &str, bins: Option<usize>) -> Result<ResidualSummary, ServiceError> {
        let store = self.store.read();
        let (_, inst) = store.instance(id)?;
        Ok(residual_summary(&store.record(&inst.record_ref)?.residuals, bins.unwrap_or(DEFAULT_BINS))?)
    }

    /// Thresholds default to 20% (warning) and 5% (danger) of the initial capital.
    pub fn cash(
        &self,
        id: &str,
        from: Option<NaiveDate>,
        to: Option<NaiveDate>,
        warning: Option<f64>,
        danger: Option<f64>,
    ) -> Result<CashView, ServiceError> {
        let store = self.store.read();
        let (_, inst) = store.instance(id)?;
        let record = store.record(&inst.record_ref)?;
        let defaults = LiquidityThresholds::for_capital(record.initial_capital);
        let thresholds = LiquidityThresholds {
            warning_level: warning.unwrap_or(defaults.warning_level),
            danger_level: danger.unwrap_or(defaults.danger_level),
        };
        let usage = cash_usage(record, thresholds, from, to)?;
        let breaches = liquidity_breaches(&usage.points);
        Ok(CashView {
            instance_id: id.to_string(),
            initial_capital: usage.initial_capital,
            thresholds: usage.thresholds,
            points: usage.points,
            breaches,
        })
    }

    /// Daily summaries for `symbol`, or for every symbol of the record
    /// (ordered by date, then symbol) when none is given.
    pub fn trades(
        &self,
        id: &str,
        symbol: Option<&str>,
        from: Option<NaiveDate>,
        to: Option<NaiveDate>,
    ) -> Result<Vec<DailyTradeSummary>, ServiceError> {
        let store = self.store.read();
        let (_, inst) = store.instance(id)?;
        let record = store.record(&inst.record_ref)?;
        let symbols = match symbol {
            Some(s) => vec![s.to_string()],
            None => record.symbols(),
        };
        let mut out = Vec::new();
        for s in &symbols {
            out.extend(daily_trade_summaries(record, s, from, to)?);
        }
        out.sort_by(|a, b| (a.date, &a.symbol).cmp(&(b.date, &b.symbol)));
        Ok(out)
    }

    pub fn market_list(&self) -> Vec<MarketSummary> {
        self.store.read().market().iter().map(MarketSummary::from).collect()
    }

    pub fn market_bars(
        &self,
        symbol: &str,
        from: Option<NaiveDate>,
        to: Option<NaiveDate>,
    ) -> Result<Vec<PricePoint>, ServiceError> {
        if let (Some(f), Some(t)) = (from, to) {
            if f > t {
                return Err(ServiceError::InvalidPeriod(format!("{f} is after {t}")));
            }
        }
        let store = self.store.read();
        let series = store.market().get(symbol)?;
        Ok(series
            .points()
            .iter()
            .filter(|p| from.is_none_or(|f| p.timestamp.date() >= f) && to.is_none_or(|t| p.timestamp.date() <= t))
            .copied()
            .collect())
    }

    pub fn overlay(
        &self,
        symbol: &str,
        from: Option<NaiveDate>,
        to: Option<NaiveDate>,
    ) -> Result<Vec<DatedValue>, ServiceError> {
        let store = self.store.read();
        let mut series = market_overlay(store.market(), &[symbol.to_string()], from, to)?;
        Ok(series.pop().map(|s| s.points).unwrap_or_default())
    }
}
