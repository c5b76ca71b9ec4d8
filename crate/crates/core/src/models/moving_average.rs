use super::{rebalance, MaParams, ModelError, ModelOutput, ResidualSeries, VariableSeries};
use crate::market_data::MarketSeries;

/// Trailing mean over `window` values; `output[i]` covers `values[i..i + window]`.
pub fn moving_average(values: &[f64], window: usize) -> Result<Vec<f64>, ModelError> {
    if window == 0 || window > values.len() {
        return Err(ModelError::WindowTooLarge { window, len: values.len() });
    }
    // Each window is summed afresh so long series do not accumulate drift.
    Ok(values.windows(window).map(|w| w.iter().sum::<f64>() / window as f64).collect())
}

/// Crossover model. The first bar where both averages exist opens a position
/// on the side of the fast average; every later strict crossing reverses it,
/// so a reversal trades twice `trade_size` in one signal.
pub fn ma_signals(series: &MarketSeries, params: &MaParams) -> Result<ModelOutput, ModelError> {
    let closes = series.closes();
    if closes.len() <= params.window_slow {
        return Err(ModelError::InsufficientData { needed: params.window_slow, got: closes.len() });
    }
    let fast = moving_average(&closes, params.window_fast)?;
    let slow = moving_average(&closes, params.window_slow)?;
    let start = params.window_slow - 1;
    let offset = params.window_slow - params.window_fast;
    let timestamps = &series.timestamps()[start..];

    let fast = &fast[offset..];
    let spread: Vec<f64> = fast.iter().zip(&slow).map(|(f, s)| f - s).collect();
    let residuals: Vec<f64> = closes[start..].iter().zip(&slow).map(|(c, s)| c - s).collect();

    let mut signals = Vec::new();
    let mut position = 0.0;
    for (i, &ts) in timestamps.iter().enumerate() {
        let tol = 1e-12 * slow[i].abs();
        let target = if spread[i] > tol {
            params.trade_size
        } else if spread[i] < -tol {
            -params.trade_size
        } else {
            position
        };
        if let Some(sig) = rebalance(ts, series.symbol(), position, target) {
            signals.push(sig);
            position = target;
        }
    }

    Ok(ModelOutput {
        signals,
        variables: vec![
            VariableSeries::new("ma_fast", timestamps, fast),
            VariableSeries::new("ma_slow", timestamps, &slow),
            VariableSeries::new("ma_spread", timestamps, &spread),
        ],
        residuals: ResidualSeries { values: residuals },
    })
}
