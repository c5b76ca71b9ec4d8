//! A pairs strategy whose child instance is caught out by a one-month
//! sell-off in which one index falls 20% and the other 10%.

use tradao::demo::{self, DemoTree};
use tradao::service::Service;
use tradao_core::analytics::RandomnessFlag;

use crate::Outcome;

const WINDOW: usize = 30;

fn sample_std(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn rolling_std(service: &Service, id: &str) -> Result<f64, String> {
    let vars = vec!["coeff_1".to_string(), "diff_thre".to_string(), "spread".to_string()];
    let grid = service.correlation(id, Some(WINDOW), None, Some(vars)).map_err(|e| e.to_string())?;
    let cell = grid
        .cells
        .iter()
        .find(|c| (c.x.as_str(), c.y.as_str()) == ("coeff_1", "diff_thre") || (c.x.as_str(), c.y.as_str()) == ("diff_thre", "coeff_1"))
        .ok_or("no coeff_1/diff_thre cell")?;
    let values: Vec<f64> = cell.rolling.iter().filter_map(|p| p.value).collect();
    if values.len() < 2 {
        return Err(format!("{id}: only {} rolling values", values.len()));
    }
    Ok(sample_std(&values))
}

struct Findings {
    profitability: (f64, f64),
    prediction: (f64, f64),
    inventory: Vec<f64>,
    std_ratio: f64,
    dw: f64,
    flag: RandomnessFlag,
}

fn investigate(seed: u64) -> Result<Findings, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let service = Service::open(dir.path()).map_err(|e| e.to_string())?;
    let DemoTree { fixture, parent, child, .. } = demo::seed(&service, seed).map_err(|e| e.to_string())?;
    let (pid, cid) = (parent.instance.id.as_str(), child.instance.id.as_str());

    let p = service.instance(pid).map_err(|e| e.to_string())?.scores.categories;
    let c = service.instance(cid).map_err(|e| e.to_string())?.scores.categories;

    let month = fixture.shocks[0];
    let days = service
        .trades(cid, Some(fixture.a.symbol()), Some(month.start), Some(month.end))
        .map_err(|e| e.to_string())?;

    let std_ratio = rolling_std(&service, cid)? / rolling_std(&service, pid)?;
    let diagnostics = service.residuals(cid, None).map_err(|e| e.to_string())?.diagnostics;
    Ok(Findings {
        profitability: (p.profitability, c.profitability),
        prediction: (p.prediction, c.prediction),
        inventory: days.iter().map(|d| d.outstanding_inventory).collect(),
        std_ratio,
        dw: diagnostics.durbin_watson,
        flag: diagnostics.randomness_flag,
    })
}

fn verdicts(f: &Findings) -> [(&'static str, bool); 4] {
    [
        ("child profitability and prediction below parent", f.profitability.1 < f.profitability.0 && f.prediction.1 < f.prediction.0),
        (
            "inventory changes sign in the sell-off month",
            f.inventory.iter().any(|&q| q > 0.0) && f.inventory.iter().any(|&q| q < 0.0),
        ),
        ("child coeff_1/diff_thre rolling correlation std >= 3x parent", f.std_ratio >= 3.0),
        ("child residuals flagged non-random", f.flag != RandomnessFlag::Random),
    ]
}

pub fn check() -> Outcome {
    let f = investigate(demo::DEMO_SEED)?;
    let failed: Vec<&str> = verdicts(&f).iter().filter(|(_, ok)| !ok).map(|(name, _)| *name).collect();
    if !failed.is_empty() {
        return Err(format!("seed {}: {}", demo::DEMO_SEED, failed.join("; ")));
    }
    let robust = (0..20u64)
        .filter(|&s| investigate(s).map(|f| verdicts(&f).iter().all(|(_, ok)| *ok)).unwrap_or(false))
        .count();
    Ok(format!(
        "profitability {:.1} < {:.1}, prediction {:.1} < {:.1}, inventory {:+}..{:+}, corr std ratio {:.1}, DW {:.3} {:?}; \
         all four hold for {robust}/20 fixture seeds",
        f.profitability.1,
        f.profitability.0,
        f.prediction.1,
        f.prediction.0,
        f.inventory.iter().copied().fold(f64::INFINITY, f64::min),
        f.inventory.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        f.std_ratio,
        f.dw,
        f.flag,
    ))
}
