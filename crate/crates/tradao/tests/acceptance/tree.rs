//! Random insert sequences against a plain parent-map model of the tree.

use std::collections::{BTreeSet, HashMap};

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tradao_core::evolution::{EvolutionTree, NewInstance};
use tradao_core::metrics::{MetricValue, MetricVector};
use tradao_core::models::{HedgeRatio, MaParams, ModelParams, PairsParams};

use crate::Outcome;

const SEQUENCES: u64 = 10_000;

fn pairs(lookback: usize) -> ModelParams {
    ModelParams::PairsTrading(PairsParams {
        symbol_a: "AAA".into(),
        symbol_b: "BBB".into(),
        lookback,
        coeff_1: HedgeRatio::Estimate,
        diff_thre: 1.0,
        exit_thre: 0.0,
        cooldown: 0,
        trade_size: 1.0,
    })
}

fn metrics(x: f64) -> MetricVector {
    let v = MetricValue::Value(x);
    MetricVector {
        yield_ann: v,
        md: v,
        sharpe: v,
        sortino: v,
        max_dd_days: v,
        avg_dd_days: v,
        var99: v,
        vol_ann: v,
        win_rate: v,
        activeness: v,
    }
}

/// Descendants by walking each node's ancestor chain.
fn closure(parents: &HashMap<String, Option<String>>, id: &str) -> BTreeSet<String> {
    parents
        .keys()
        .filter(|n| {
            let mut cur = parents[*n].as_deref();
            while let Some(p) = cur {
                if p == id {
                    return true;
                }
                cur = parents[p].as_deref();
            }
            false
        })
        .cloned()
        .collect()
}

pub fn check() -> Outcome {
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    for seed in 0..SEQUENCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tree = EvolutionTree::for_params(&pairs(2));
        let mut model: HashMap<String, Option<String>> = HashMap::new();
        let mut ids: Vec<String> = Vec::new();
        let ops = rng.random_range(1..40);
        for op in 0..ops {
            let existing = |rng: &mut ChaCha8Rng| (!ids.is_empty()).then(|| ids[rng.random_range(0..ids.len())].clone());
            let roll = rng.random_range(0..100);
            let fresh = format!("n{op}");
            let (id, parent, params) = match roll {
                0..70 => (fresh, existing(&mut rng), pairs(2 + op)),
                70..78 => (fresh, Some(format!("ghost{op}")), pairs(3)),
                78..86 => (existing(&mut rng).unwrap_or(fresh), existing(&mut rng), pairs(4)),
                86..93 => (fresh, None, pairs(5)),
                _ => (
                    fresh,
                    existing(&mut rng),
                    ModelParams::MovingAverage(MaParams { symbol: "AAA".into(), window_fast: 2, window_slow: 3, trade_size: 1.0 }),
                ),
            };
            let valid = matches!(params, ModelParams::PairsTrading(_))
                && !model.contains_key(&id)
                && match &parent {
                    None => model.is_empty(),
                    Some(p) => model.contains_key(p),
                };
            let before = tree.len();
            let result = tree.add_instance(NewInstance {
                id: id.clone(),
                parent_id: parent.clone(),
                label: None,
                params,
                record_ref: id.clone(),
                metrics: metrics(op as f64),
                created_at: Utc.timestamp_opt(1_700_000_000 + op as i64, 0).unwrap(),
            });
            match (result.is_ok(), valid) {
                (true, true) => {
                    model.insert(id.clone(), parent);
                    ids.push(id);
                    accepted += 1;
                }
                (false, false) => {
                    if tree.len() != before {
                        return Err(format!("sequence {seed}: rejected insert changed the tree"));
                    }
                    rejected += 1;
                }
                (got, want) => return Err(format!("sequence {seed} op {op}: accepted={got}, model says {want}")),
            }
            tree.check_invariants().map_err(|e| format!("sequence {seed} op {op}: {e}"))?;
        }

        let trees = if seed % 50 == 0 {
            let json = serde_json::to_string(&tree).unwrap();
            vec![tree.clone(), serde_json::from_str::<EvolutionTree>(&json).map_err(|e| e.to_string())?]
        } else {
            vec![tree]
        };
        for t in &trees {
            t.check_invariants()?;
            let roots = model.values().filter(|p| p.is_none()).count();
            if t.len() != model.len() || (!model.is_empty() && roots != 1) {
                return Err(format!("sequence {seed}: {} nodes, {roots} roots", t.len()));
            }
            for id in &ids {
                let sub: BTreeSet<String> = t.subtree(id).map_err(|e| e.to_string())?.into_iter().collect();
                if sub != closure(&model, id) {
                    return Err(format!("sequence {seed}: subtree of {id} differs from the transitive closure"));
                }
                let parent = t.parent_of(id).map_err(|e| e.to_string())?.map(|p| p.id.clone());
                if parent != model[id] {
                    return Err(format!("sequence {seed}: parent of {id} is {parent:?}"));
                }
            }
        }
    }
    Ok(format!("{SEQUENCES} sequences, {accepted} inserts accepted, {rejected} rejected as the model predicted"))
}
