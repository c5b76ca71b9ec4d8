//! Rolling correlation bounds and identities, Durbin-Watson range and flags.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use tradao_core::analytics::{durbin_watson, pearson, residual_summary, rolling_correlation, RandomnessFlag};
use tradao_core::models::ResidualSeries;

use crate::Outcome;

fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn series(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let rho: f64 = rng.random_range(-1.0..1.0);
    let scale = 10f64.powi(rng.random_range(-3..4));
    let trend = rng.random_range(-1.0..1.0);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        x.push(scale * (a + trend * i as f64 / n as f64));
        y.push(scale * (rho * a + (1.0 - rho * rho).sqrt() * b) + 7.0);
    }
    (x, y)
}

pub fn check() -> Outcome {
    let mut windows = 0usize;
    for seed in 0..400 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..300);
        let (x, y) = series(&mut rng, n);
        let window = rng.random_range(2..=n);
        let rolling = rolling_correlation(&x, &y, window).map_err(|e| e.to_string())?;
        if rolling.len() != n - window + 1 {
            return Err(format!("seed {seed}: {} windows of {window} over {n} points", rolling.len()));
        }
        for r in rolling.iter().flatten() {
            if !(-1.0..=1.0).contains(r) {
                return Err(format!("seed {seed}: rolling correlation {r}"));
            }
        }
        windows += rolling.iter().flatten().count();

        let full = rolling_correlation(&x, &y, n).map_err(|e| e.to_string())?;
        let last = full[0].ok_or("full window undefined")?;
        let global = pearson(&x, &y).map_err(|e| e.to_string())?;
        let oracle = naive_pearson(&x, &y);
        if (last - global).abs() > 1e-10 || (last - oracle).abs() > 1e-10 {
            return Err(format!("seed {seed}: window = n gives {last}, pearson {global}, oracle {oracle}"));
        }
    }

    for seed in 0..400 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let n = rng.random_range(2..200);
        let kind = seed % 4;
        let e: Vec<f64> = (0..n)
            .map(|i| match kind {
                0 => rng.random_range(-1.0..1.0),
                1 => (if i % 2 == 0 { 1.0 } else { -1.0 }) * rng.random_range(0.5..2.0),
                2 => i as f64 + rng.random_range(-0.1..0.1),
                _ => 1e6 * rng.random_range(-1.0..1.0),
            })
            .collect();
        let dw = durbin_watson(&e).map_err(|err| format!("seed {seed}: {err}"))?;
        if !(0.0..=4.0).contains(&dw) {
            return Err(format!("seed {seed}: DW {dw}"));
        }
    }

    let alternating = durbin_watson(&[1.0, -1.0, 1.0, -1.0]).map_err(|e| e.to_string())?;
    if alternating != 3.0 {
        return Err(format!("alternating fixture DW = {alternating}, expected exactly 3.0"));
    }

    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut dws = Vec::new();
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..500).map(|_| noise.sample(&mut rng)).collect();
        let summary = residual_summary(&ResidualSeries { values }, 20).map_err(|e| e.to_string())?;
        if summary.diagnostics.randomness_flag != RandomnessFlag::Random {
            return Err(format!("white noise seed {seed} flagged {:?}", summary.diagnostics.randomness_flag));
        }
        dws.push(summary.diagnostics.durbin_watson);
    }
    let lo = dws.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = dws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(format!(
        "400 series / {windows} windows in [-1,1], window=n matches Pearson, DW in [0,4], alternating DW = 3.0, \
         50 white-noise series random (DW {lo:.2}..{hi:.2})"
    ))
}
