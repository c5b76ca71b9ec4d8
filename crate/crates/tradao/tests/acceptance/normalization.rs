//! Min-max scoring on fuzzed instance sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tradao_core::metrics::{normalize_scores, MetricError, MetricId, MetricValue, MetricVector, OrientationTable};

use crate::Outcome;

const TRIALS: u64 = 3000;

const METRICS: [MetricId; 10] = [
    MetricId::Yield,
    MetricId::Md,
    MetricId::Sharpe,
    MetricId::Sortino,
    MetricId::MaxDd,
    MetricId::AvgDd,
    MetricId::Var99,
    MetricId::Vol,
    MetricId::WinRate,
    MetricId::Activeness,
];

/// The four risk measures where smaller raw values are better.
fn lower_is_better(id: MetricId) -> bool {
    matches!(id, MetricId::Md | MetricId::MaxDd | MetricId::AvgDd | MetricId::Vol)
}

const CATEGORIES: [(&str, &[MetricId]); 6] = [
    ("profitability", &[MetricId::Yield, MetricId::Md]),
    ("consistency", &[MetricId::Sharpe, MetricId::Sortino]),
    ("recovery", &[MetricId::MaxDd, MetricId::AvgDd]),
    ("robustness", &[MetricId::Var99, MetricId::Vol]),
    ("prediction", &[MetricId::WinRate]),
    ("activeness", &[MetricId::Activeness]),
];

fn vector(values: &[MetricValue; 10]) -> MetricVector {
    MetricVector {
        yield_ann: values[0],
        md: values[1],
        sharpe: values[2],
        sortino: values[3],
        max_dd_days: values[4],
        avg_dd_days: values[5],
        var99: values[6],
        vol_ann: values[7],
        win_rate: values[8],
        activeness: values[9],
    }
}

pub fn check() -> Outcome {
    let orientation = OrientationTable::default();
    let mut degenerate_seen = 0;
    let mut pairs_checked = 0u64;
    for seed in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..=50);
        let mut raw = vec![[MetricValue::Value(0.0); 10]; m];
        for k in 0..10 {
            let degenerate = rng.random_bool(0.15);
            let constant = rng.random_range(-400..400) as f64 / 8.0;
            let absent_share = [0.0, 0.0, 0.2, 0.9][rng.random_range(0..4)];
            for row in raw.iter_mut() {
                row[k] = if rng.random_bool(absent_share) {
                    MetricValue::Absent(MetricError::NoTrades)
                } else if degenerate {
                    MetricValue::Value(constant)
                } else {
                    MetricValue::Value(rng.random_range(-400..400) as f64 / 8.0)
                };
            }
        }
        let vectors: Vec<MetricVector> = raw.iter().map(vector).collect();
        let scores = normalize_scores(&vectors, &orientation).map_err(|e| e.to_string())?;

        for (k, &id) in METRICS.iter().enumerate() {
            let present: Vec<(usize, f64)> = raw.iter().enumerate().filter_map(|(i, r)| r[k].value().map(|v| (i, v))).collect();
            let all_equal = present.windows(2).all(|w| w[0].1 == w[1].1);
            for (i, row) in raw.iter().enumerate() {
                let s = scores[i].metrics.get(id);
                if !(0.0..=100.0).contains(&s) {
                    return Err(format!("trial {seed}: {id:?} score {s} out of range"));
                }
                if row[k].value().is_none() && s != 0.0 {
                    return Err(format!("trial {seed}: absent {id:?} scored {s}"));
                }
            }
            if all_equal {
                degenerate_seen += usize::from(!present.is_empty());
                if let Some(&(i, _)) = present.iter().find(|&&(i, _)| scores[i].metrics.get(id) != 50.0) {
                    return Err(format!("trial {seed}: degenerate {id:?} scored {}", scores[i].metrics.get(id)));
                }
                continue;
            }
            for &(a, va) in &present {
                for &(b, vb) in &present {
                    let raw_order = if lower_is_better(id) { vb.partial_cmp(&va) } else { va.partial_cmp(&vb) };
                    let score_order = scores[a].metrics.get(id).partial_cmp(&scores[b].metrics.get(id));
                    if raw_order != score_order {
                        return Err(format!("trial {seed}: {id:?} order of {va} vs {vb} not preserved"));
                    }
                    pairs_checked += 1;
                }
            }
        }

        for s in &scores {
            for (name, members) in CATEGORIES {
                let want = members.iter().map(|&id| s.metrics.get(id)).sum::<f64>() / members.len() as f64;
                let got = serde_json::to_value(s.categories).unwrap()[name].as_f64().unwrap();
                if !(0.0..=100.0).contains(&got) || (got - want).abs() > 1e-12 {
                    return Err(format!("trial {seed}: category {name} = {got}, members average {want}"));
                }
            }
        }
    }
    Ok(format!("{TRIALS} sets of 1-50 instances, {pairs_checked} ordered pairs, {degenerate_seen} degenerate metrics"))
}
