use super::{ensure_aligned, ols_fit, rebalance, ModelError, ModelOutput, RegressionParams, ResidualSeries, VariableSeries};
use crate::market_data::{simple_returns, MarketSeries};
use crate::time::Timestamp;

/// Rolling multivariate regression of target returns on factor returns.
///
/// For each window of `lookback` returns the fitted value at the window's
/// last observation is taken as the predicted next return. Predictions above
/// `signal_thre` move the book to `+trade_size`, below `−signal_thre` to
/// `−trade_size`; anything in between holds the current position.
pub fn regression_signals(
    target: &MarketSeries,
    factors: &[MarketSeries],
    params: &RegressionParams,
) -> Result<ModelOutput, ModelError> {
    let mut all = vec![target];
    all.extend(factors.iter());
    ensure_aligned(&all)?;
    let k = factors.len();
    if k != params.factors.len() {
        return Err(ModelError::WrongInputs { expected: params.factors.clone() });
    }

    let y = simple_returns(&target.closes())?;
    let xs: Vec<Vec<f64>> =
        factors.iter().map(|f| simple_returns(&f.closes())).collect::<Result<_, _>>()?;
    let lookback = params.lookback;
    if y.len() <= lookback {
        return Err(ModelError::InsufficientData { needed: lookback + 1, got: target.len() });
    }
    if lookback <= k + 1 {
        return Err(ModelError::TooFewObservations { needed: k + 1, got: lookback });
    }

    // Return i is realised at bar i + 1.
    let bar_ts = target.timestamps();
    let mut stamps: Vec<Timestamp> = Vec::new();
    let mut intercepts = Vec::new();
    let mut betas: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut predictions = Vec::new();
    let mut residuals = Vec::new();
    let mut signals = Vec::new();
    let mut position = 0.0;

    for end in lookback - 1..y.len() {
        let start = end + 1 - lookback;
        let window_x: Vec<&[f64]> = xs.iter().map(|x| &x[start..=end]).collect();
        let fit = ols_fit(&y[start..=end], &window_x)?;
        let ts = bar_ts[end + 1];
        let prediction = fit.fitted[lookback - 1];

        stamps.push(ts);
        intercepts.push(fit.intercept);
        for (series, b) in betas.iter_mut().zip(&fit.slopes) {
            series.push(*b);
        }
        predictions.push(prediction);
        residuals.push(fit.residuals[lookback - 1]);

        let target_pos = if prediction > params.signal_thre {
            params.trade_size
        } else if prediction < -params.signal_thre {
            -params.trade_size
        } else {
            position
        };
        if let Some(sig) = rebalance(ts, target.symbol(), position, target_pos) {
            signals.push(sig);
            position = target_pos;
        }
    }

    let mut variables = vec![VariableSeries::new("intercept", &stamps, &intercepts)];
    for (name, series) in params.factors.iter().zip(&betas) {
        variables.push(VariableSeries::new(format!("beta_{name}"), &stamps, series));
    }
    variables.push(VariableSeries::new("prediction", &stamps, &predictions));

    Ok(ModelOutput { signals, variables, residuals: ResidualSeries { values: residuals } })
}
