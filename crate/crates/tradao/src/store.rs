//! Durable keyed collections under a data directory:
//!
//! ```text
//! <data>/market/<SYMBOL>.csv
//! <data>/records/<instance-id>.json
//! <data>/strategies/<strategy-id>.json   (the evolution tree)
//! ```
//!
//! Every file is replaced atomically (write to a temp file, then rename).

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tradao_core::backtest::BacktestRecord;
use tradao_core::evolution::{AlgorithmInstance, EvolutionTree};
use tradao_core::market_data::{load_market_csv, write_market_csv, MarketSeries, MarketStore};

use crate::error::ServiceError;

const MARKET: &str = "market";
const RECORDS: &str = "records";
const STRATEGIES: &str = "strategies";

/// Ids double as file names, so they are restricted to a safe alphabet.
pub fn validate_id(id: &str) -> Result<(), ServiceError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(ServiceError::SchemaViolation(format!(
            "id `{id}` must be 1-128 characters of [A-Za-z0-9._-] and not start with '.'"
        )))
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("store values serialize");
    bytes.push(b'\n');
    bytes
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
    let dir = path.parent().expect("store paths have a parent");
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| ServiceError::store(dir, e))?;
    tmp.write_all(bytes).map_err(|e| ServiceError::store(path, e))?;
    tmp.as_file().sync_all().map_err(|e| ServiceError::store(path, e))?;
    tmp.persist(path).map_err(|e| ServiceError::store(path, e.error))?;
    Ok(())
}

fn json_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, ServiceError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| ServiceError::store(dir, e))? {
        let path = entry.map_err(|e| ServiceError::store(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "json") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    market: MarketStore,
    trees: BTreeMap<String, EvolutionTree>,
    records: HashMap<String, BacktestRecord>,
    /// instance id → strategy id
    owners: HashMap<String, String>,
}

impl Store {
    /// Opens (creating if needed) the store at `root` and loads everything,
    /// checking referential integrity.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let root = root.into();
        for sub in [MARKET, RECORDS, STRATEGIES] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(|e| ServiceError::store(&dir, e))?;
        }

        let mut market = MarketStore::new();
        let market_dir = root.join(MARKET);
        let mut csvs: Vec<PathBuf> = fs::read_dir(&market_dir)
            .map_err(|e| ServiceError::store(&market_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        csvs.sort();
        for path in csvs {
            let symbol = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            market.insert(load_market_csv(&path, &symbol).map_err(|e| ServiceError::store(&path, e))?);
        }

        let mut records = HashMap::new();
        for (id, path) in json_files(&root.join(RECORDS))? {
            let bytes = fs::read(&path).map_err(|e| ServiceError::store(&path, e))?;
            let record: BacktestRecord = serde_json::from_slice(&bytes).map_err(|e| ServiceError::store(&path, e))?;
            records.insert(id, record);
        }

        let mut trees = BTreeMap::new();
        let mut owners = HashMap::new();
        for (id, path) in json_files(&root.join(STRATEGIES))? {
            let bytes = fs::read(&path).map_err(|e| ServiceError::store(&path, e))?;
            let tree: EvolutionTree = serde_json::from_slice(&bytes).map_err(|e| ServiceError::store(&path, e))?;
            for node in tree.nodes() {
                owners.insert(node.id.clone(), id.clone());
            }
            trees.insert(id, tree);
        }

        let store = Store { root, market, trees, records, owners };
        store.check_integrity().map_err(|m| ServiceError::store(&store.root, m))?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Instance → record, instance → strategy and record → symbol references
    /// all resolve.
    pub fn check_integrity(&self) -> Result<(), String> {
        for (sid, tree) in &self.trees {
            if tree.strategy_id() != sid {
                return Err(format!("strategy file `{sid}` holds tree `{}`", tree.strategy_id()));
            }
            tree.check_invariants()?;
            for node in tree.nodes() {
                let record = self
                    .records
                    .get(&node.record_ref)
                    .ok_or_else(|| format!("instance `{}` refers to missing record `{}`", node.id, node.record_ref))?;
                if let Some(s) = record.symbols().into_iter().find(|s| !self.market.contains(s)) {
                    return Err(format!("record `{}` refers to missing symbol `{s}`", node.record_ref));
                }
                if node.strategy_id != *sid {
                    return Err(format!("instance `{}` claims strategy `{}`", node.id, node.strategy_id));
                }
            }
        }
        if self.records.keys().any(|id| !self.owners.contains_key(id)) {
            return Err("a record has no owning instance".into());
        }
        Ok(())
    }

    pub fn market(&self) -> &MarketStore {
        &self.market
    }

    /// Persists and installs `series`, replacing any series with the same symbol.
    /// Returns whether a series was replaced.
    pub fn put_market(&mut self, series: MarketSeries) -> Result<bool, ServiceError> {
        let path = self.root.join(MARKET).join(format!("{}.csv", series.symbol()));
        let mut bytes = Vec::new();
        write_market_csv(&series, &mut bytes).map_err(|e| ServiceError::store(&path, e))?;
        write_atomic(&path, &bytes)?;
        Ok(self.market.insert(series).is_some())
    }

    pub fn trees(&self) -> impl Iterator<Item = &EvolutionTree> {
        self.trees.values()
    }

    pub fn tree(&self, strategy_id: &str) -> Option<&EvolutionTree> {
        self.trees.get(strategy_id)
    }

    pub fn instance(&self, id: &str) -> Result<(&EvolutionTree, &AlgorithmInstance), ServiceError> {
        let unknown = || ServiceError::UnknownInstance(id.to_string());
        let tree = self.owners.get(id).and_then(|s| self.trees.get(s)).ok_or_else(unknown)?;
        let inst = tree.get(id).map_err(|_| unknown())?;
        Ok((tree, inst))
    }

    pub fn contains_instance(&self, id: &str) -> bool {
        self.owners.contains_key(id)
    }

    pub fn record(&self, id: &str) -> Result<&BacktestRecord, ServiceError> {
        self.records.get(id).ok_or_else(|| ServiceError::UnknownInstance(id.to_string()))
    }

    /// Persists a new record together with the strategy tree that now
    /// references it. The record file is written first and removed again if
    /// the tree cannot be written, so a failure leaves the store unchanged.
    pub fn commit_instance(&mut self, tree: EvolutionTree, record: BacktestRecord) -> Result<(), ServiceError> {
        let id = record.instance_id.clone();
        validate_id(&id)?;
        let record_path = self.root.join(RECORDS).join(format!("{id}.json"));
        let tree_path = self.root.join(STRATEGIES).join(format!("{}.json", tree.strategy_id()));
        write_atomic(&record_path, &to_json_bytes(&record))?;
        if let Err(e) = write_atomic(&tree_path, &to_json_bytes(&tree)) {
            let _ = fs::remove_file(&record_path);
            return Err(e);
        }
        let sid = tree.strategy_id().to_string();
        self.owners.insert(id.clone(), sid.clone());
        self.records.insert(id, record);
        self.trees.insert(sid, tree);
        Ok(())
    }
}
