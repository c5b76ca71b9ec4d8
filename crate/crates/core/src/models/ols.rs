use nalgebra::{DMatrix, DVector};

use super::ModelError;
use crate::stats::mean;

/// Ordinary least squares fit with an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub intercept: f64,
    /// One slope per regressor, in input order.
    pub slopes: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

const RANK_TOL: f64 = 1e-10;

/// Regresses `y` on the columns `xs` plus an intercept.
///
/// Columns are centred before a Householder QR solve, which makes the
/// intercept exact and the residuals sum to zero up to rounding.
pub fn ols_fit(y: &[f64], xs: &[&[f64]]) -> Result<OlsFit, ModelError> {
    let n = y.len();
    let k = xs.len();
    if xs.iter().any(|x| x.len() != n) {
        return Err(ModelError::LengthMismatch);
    }
    if n <= k + 1 {
        return Err(ModelError::TooFewObservations { needed: k + 1, got: n });
    }

    let y_mean = mean(y);
    let x_means: Vec<f64> = xs.iter().map(|x| mean(x)).collect();

    let slopes: Vec<f64> = if k == 0 {
        Vec::new()
    } else {
        let design = DMatrix::from_fn(n, k, |i, j| xs[j][i] - x_means[j]);
        let response = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let col_norms: Vec<f64> = (0..k).map(|j| design.column(j).norm()).collect();
        let qr = design.qr();
        let r = qr.r();
        for j in 0..k {
            if col_norms[j] == 0.0 || r[(j, j)].abs() <= RANK_TOL * col_norms[j] {
                return Err(ModelError::RankDeficient);
            }
        }
        let qty = qr.q().transpose() * response;
        let beta = r.solve_upper_triangular(&qty).ok_or(ModelError::RankDeficient)?;
        beta.iter().copied().collect()
    };

    let intercept = y_mean - slopes.iter().zip(&x_means).map(|(b, m)| b * m).sum::<f64>();
    let fitted: Vec<f64> = (0..n)
        .map(|i| intercept + slopes.iter().zip(xs).map(|(b, x)| b * x[i]).sum::<f64>())
        .collect();
    let residuals = y.iter().zip(&fitted).map(|(a, f)| a - f).collect();
    Ok(OlsFit { intercept, slopes, fitted, residuals })
}
