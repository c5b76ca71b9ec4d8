//! Parameter-correlation and residual diagnostics.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::models::{ResidualSeries, VariableSeries};
use crate::stats::{mean, negligible_spread, sample_std};
use crate::time::Timestamp;

pub const DEFAULT_WINDOW: usize = 30;
pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("series lengths differ")]
    LengthMismatch,
    #[error("series is too short")]
    TooShort,
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("window {window} must be between 2 and the series length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("input is empty")]
    EmptyInput,
    #[error("bin count must be at least 1")]
    InvalidBins,
    #[error("need at least 3 variable series, found {0}")]
    TooFewVariables(usize),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("exactly 3 distinct variables are required")]
    WrongVariableCount,
    #[error("residuals are all zero")]
    AllZeroResiduals,
}

/// Sample Pearson correlation, clamped to [−1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::LengthMismatch);
    }
    if x.len() < 2 {
        return Err(AnalyticsError::TooShort);
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let n1 = (x.len() - 1) as f64;
    if sxx == 0.0 || syy == 0.0 || negligible_spread((sxx / n1).sqrt(), x) || negligible_spread((syy / n1).sqrt(), y) {
        return Err(AnalyticsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `output[i]` is the correlation over the window ending at `i + window − 1`.
/// Windows where either input is constant yield `None`.
pub fn rolling_correlation(x: &[f64], y: &[f64], window: usize) -> Result<Vec<Option<f64>>, AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::LengthMismatch);
    }
    if window < 2 || window > x.len() {
        return Err(AnalyticsError::WindowTooLarge { window, len: x.len() });
    }
    Ok(x.windows(window).zip(y.windows(window)).map(|(a, b)| pearson(a, b).ok()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Share of observations per bin; sums to 1.
    pub densities: Vec<f64>,
}

/// Equal-width bins over `[min, max]`. A single distinct value gets one bin.
pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram, AnalyticsError> {
    if values.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    if bins == 0 {
        return Err(AnalyticsError::InvalidBins);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = values.len();
    if lo == hi {
        return Ok(Histogram { edges: vec![lo, hi], counts: vec![n], densities: vec![1.0] });
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    let mut counts = vec![0usize; bins];
    for &v in values {
        let mut b = (((v - lo) / width) as usize).min(bins - 1);
        // Keep the assignment consistent with the stored edges.
        while b > 0 && v < edges[b] {
            b -= 1;
        }
        while b + 1 < bins && v >= edges[b + 1] {
            b += 1;
        }
        counts[b] += 1;
    }
    let densities = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(Histogram { edges, counts, densities })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingPoint {
    pub timestamp: Timestamp,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub x: String,
    pub y: String,
    pub scatter_self: Vec<[f64; 2]>,
    pub scatter_parent: Option<Vec<[f64; 2]>>,
    /// Correlation over the whole overlapping history, when defined.
    pub overall: Option<f64>,
    pub rolling: Vec<RollingPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableHistogram {
    pub variable: String,
    pub histogram_self: Histogram,
    pub histogram_parent: Option<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGrid {
    pub variables: Vec<String>,
    pub window: usize,
    /// Pairs (0,1), (0,2), (1,2) of `variables`.
    pub cells: Vec<CorrelationCell>,
    pub histograms: Vec<VariableHistogram>,
}

/// Picks three variables: the three with the largest sample variance,
/// ties broken by name, reported in the instance's own variable order.
pub fn select_variables(vars: &[VariableSeries]) -> Result<Vec<String>, AnalyticsError> {
    if vars.len() < 3 {
        return Err(AnalyticsError::TooFewVariables(vars.len()));
    }
    let mut ranked: Vec<(f64, &str)> = vars
        .iter()
        .map(|v| {
            let raw = v.raw();
            let var = if raw.len() >= 2 { sample_std(&raw).powi(2) } else { 0.0 };
            (var, v.name.as_str())
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    let top: BTreeSet<&str> = ranked.iter().take(3).map(|(_, n)| *n).collect();
    Ok(vars.iter().filter(|v| top.contains(v.name.as_str())).map(|v| v.name.clone()).collect())
}

fn lookup<'a>(vars: &'a [VariableSeries], name: &str) -> Option<&'a VariableSeries> {
    vars.iter().find(|v| v.name == name)
}

/// Values of `a` and `b` on their common timestamps.
fn paired(a: &VariableSeries, b: &VariableSeries) -> (Vec<Timestamp>, Vec<f64>, Vec<f64>) {
    let bmap: HashMap<Timestamp, f64> = b.values.iter().map(|v| (v.0, v.1)).collect();
    let mut ts = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for v in &a.values {
        if let Some(&y) = bmap.get(&v.0) {
            ts.push(v.0);
            xs.push(v.1);
            ys.push(y);
        }
    }
    (ts, xs, ys)
}

fn scatter(xs: &[f64], ys: &[f64]) -> Vec<[f64; 2]> {
    xs.iter().zip(ys).map(|(&x, &y)| [x, y]).collect()
}

/// Builds the 3×3 grid of scatter plots, histograms and rolling correlations
/// over three of the instance's variables, overlaying the parent's
/// same-named series when a parent is given.
pub fn correlation_grid(
    own: &[VariableSeries],
    parent: Option<&[VariableSeries]>,
    window: usize,
    bins: usize,
    chosen: Option<&[String]>,
) -> Result<CorrelationGrid, AnalyticsError> {
    let variables = match chosen {
        Some(names) => {
            let distinct: BTreeSet<&String> = names.iter().collect();
            if names.len() != 3 || distinct.len() != 3 {
                return Err(AnalyticsError::WrongVariableCount);
            }
            for n in names {
                lookup(own, n).ok_or_else(|| AnalyticsError::UnknownVariable(n.clone()))?;
            }
            names.to_vec()
        }
        None => select_variables(own)?,
    };
    let series: Vec<&VariableSeries> = variables.iter().map(|n| lookup(own, n).expect("selected from own")).collect();

    let mut cells = Vec::new();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let (ts, xs, ys) = paired(series[i], series[j]);
        let rolling = rolling_correlation(&xs, &ys, window)?;
        let scatter_parent = parent.and_then(|pv| {
            let (_, px, py) = paired(lookup(pv, &variables[i])?, lookup(pv, &variables[j])?);
            Some(scatter(&px, &py))
        });
        cells.push(CorrelationCell {
            x: variables[i].clone(),
            y: variables[j].clone(),
            scatter_self: scatter(&xs, &ys),
            scatter_parent,
            overall: pearson(&xs, &ys).ok(),
            rolling: ts[window - 1..]
                .iter()
                .zip(rolling)
                .map(|(&timestamp, value)| RollingPoint { timestamp, value })
                .collect(),
        });
    }

    let histograms = series
        .iter()
        .map(|s| {
            Ok(VariableHistogram {
                variable: s.name.clone(),
                histogram_self: histogram(&s.raw(), bins)?,
                histogram_parent: parent
                    .and_then(|pv| lookup(pv, &s.name))
                    .filter(|p| !p.values.is_empty())
                    .map(|p| histogram(&p.raw(), bins))
                    .transpose()?,
            })
        })
        .collect::<Result<Vec<_>, AnalyticsError>>()?;

    Ok(CorrelationGrid { variables, window, cells, histograms })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomnessFlag {
    Random,
    PositiveAutocorr,
    NegativeAutocorr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualDiagnostics {
    pub durbin_watson: f64,
    /// Standardized runs-test statistic on residual signs; `None` when all
    /// non-zero residuals share one sign.
    pub runs_z: Option<f64>,
    pub randomness_flag: RandomnessFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    /// `[index, residual]` in input order.
    pub scatter: Vec<(usize, f64)>,
    pub histogram: Histogram,
    pub diagnostics: ResidualDiagnostics,
}

pub const MIN_DIAGNOSTIC_LEN: usize = 8;

/// `Σ_{t≥2}(e_t − e_{t−1})² / Σ e_t²`, always within [0, 4].
pub fn durbin_watson(residuals: &[f64]) -> Result<f64, AnalyticsError> {
    if residuals.len() < 2 {
        return Err(AnalyticsError::TooShort);
    }
    let denom: f64 = residuals.iter().map(|e| e * e).sum();
    if denom == 0.0 {
        return Err(AnalyticsError::AllZeroResiduals);
    }
    let num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok((num / denom).clamp(0.0, 4.0))
}

/// Wald–Wolfowitz runs test on the signs of the residuals about zero
/// (exact zeros are skipped).
pub fn runs_test_z(residuals: &[f64]) -> Option<f64> {
    let signs: Vec<bool> = residuals.iter().filter(|e| **e != 0.0).map(|e| *e > 0.0).collect();
    let n_pos = signs.iter().filter(|s| **s).count() as f64;
    let n_neg = signs.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return None;
    }
    let n = n_pos + n_neg;
    let runs = 1.0 + signs.windows(2).filter(|w| w[0] != w[1]).count() as f64;
    let expected = 2.0 * n_pos * n_neg / n + 1.0;
    let variance = 2.0 * n_pos * n_neg * (2.0 * n_pos * n_neg - n) / (n * n * (n - 1.0));
    if variance <= 0.0 {
        return None;
    }
    Some((runs - expected) / variance.sqrt())
}

pub fn randomness_flag(dw: f64) -> RandomnessFlag {
    if dw > 3.0 {
        RandomnessFlag::NegativeAutocorr
    } else if dw < 1.0 {
        RandomnessFlag::PositiveAutocorr
    } else {
        RandomnessFlag::Random
    }
}

pub fn residual_summary(residuals: &ResidualSeries, bins: usize) -> Result<ResidualSummary, AnalyticsError> {
    let e = &residuals.values;
    if e.len() < MIN_DIAGNOSTIC_LEN {
        return Err(AnalyticsError::TooShort);
    }
    let dw = durbin_watson(e)?;
    Ok(ResidualSummary {
        scatter: e.iter().copied().enumerate().collect(),
        histogram: histogram(e, bins)?,
        diagnostics: ResidualDiagnostics {
            durbin_watson: dw,
            runs_z: runs_test_z(e),
            randomness_flag: randomness_flag(dw),
        },
    })
}
