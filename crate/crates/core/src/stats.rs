//! Small numeric helpers shared by the models, metrics and analytics modules.

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator), two-pass. Requires `xs.len() >= 2`.
pub fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// True when a dispersion measure is indistinguishable from rounding noise
/// relative to the magnitude of the data it was computed from.
pub fn negligible_spread(spread: f64, xs: &[f64]) -> bool {
    let scale = xs.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    spread <= 64.0 * f64::EPSILON * scale
}

/// Linear-interpolation quantile of already-sorted data (`q` in [0, 1]).
pub fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
