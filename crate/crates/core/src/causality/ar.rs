//! Lagged OLS regressions and BIC lag selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::least_squares;

/// Longest look-back, in slices (60 seconds).
pub const DEFAULT_MAX_LAG: usize = 6;

/// rss / tss below this is treated as an exact fit.
const PERFECT_FIT_TOL: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ARFit {
    pub lag: usize,
    pub intercept: f64,
    /// `coefficients[p][l - 1]` multiplies predictor `p` at lag `l`; dropped
    /// columns report 0.
    pub coefficients: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub n_used: usize,
    /// Retained lagged regressors, intercept excluded.
    pub k: usize,
    pub bic: f64,
}

/// Regresses `target[t]` on an intercept and lags 1..=`lag` of every
/// predictor. Callers include the target itself among the predictors.
///
/// Zero-variance and linearly dependent lag columns are dropped before the
/// solve; `k` counts only what remains.
pub fn fit_ar(target: &[f64], predictors: &[&[f64]], lag: usize) -> Result<ARFit> {
    let len = target.len();
    if lag == 0 {
        return Err(Error::InsufficientData("lag must be ≥ 1".into()));
    }
    if predictors.iter().any(|p| p.len() != len) {
        return Err(Error::InsufficientData("series lengths differ".into()));
    }
    let k_nominal = predictors.len() * lag;
    if len <= lag || len - lag <= k_nominal + 1 {
        return Err(Error::InsufficientData(format!(
            "{len} observations cannot support lag {lag} with {k_nominal} regressors"
        )));
    }
    let n_used = len - lag;
    let y = &target[lag..];

    let mut columns = vec![vec![1.0; n_used]];
    let mut slots = Vec::new();
    for (p, series) in predictors.iter().enumerate() {
        for l in 1..=lag {
            let col: Vec<f64> = series[lag - l..len - l].to_vec();
            if col.windows(2).all(|w| w[0] == w[1]) {
                continue;
            }
            columns.push(col);
            slots.push((p, l));
        }
    }

    let fit = least_squares(&columns, y);
    let mut coefficients = vec![vec![0.0; lag]; predictors.len()];
    for (c, &(p, l)) in slots.iter().enumerate() {
        if let Some(b) = fit.coefficients[c + 1] {
            coefficients[p][l - 1] = b;
        }
    }
    let k = fit.rank() - 1;
    let y_mean = y.iter().sum::<f64>() / n_used as f64;
    let tss: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    if tss == 0.0 || fit.rss <= PERFECT_FIT_TOL * tss {
        return Err(Error::PerfectFit { k, n_used });
    }
    let n = n_used as f64;
    let bic = n * (fit.rss / n).ln() + (k as f64 + 1.0) * n.ln();
    Ok(ARFit {
        lag,
        intercept: fit.coefficients[0].unwrap_or(0.0),
        coefficients,
        residuals: fit.residuals,
        rss: fit.rss,
        n_used,
        k,
        bic,
    })
}

/// Lag in 1..=`max_lag` minimizing BIC(restricted) + BIC(unrestricted).
///
/// The restricted model predicts `x` from lags of `x` (and `z`); the
/// unrestricted model adds lags of `y`. Every candidate is scored on the same
/// targets, those after the largest feasible lag, so the comparison does not
/// depend on the scale of `x`. Ties go to the smaller lag.
pub fn select_lag(
    x: &[f64],
    y: Option<&[f64]>,
    z: Option<&[f64]>,
    max_lag: usize,
) -> Result<usize> {
    let mut restricted: Vec<&[f64]> = vec![x];
    restricted.extend(z);
    let mut unrestricted = restricted.clone();
    unrestricted.extend(y);

    let len = x.len();
    let feasible = |lag: usize| len > lag && len - lag > unrestricted.len() * lag + 1;
    let top = (1..=max_lag)
        .take_while(|&l| feasible(l))
        .last()
        .ok_or_else(|| {
            Error::InsufficientData(format!("{len} observations are too few for lag 1"))
        })?;

    let mut best: Option<(f64, usize)> = None;
    for lag in 1..=top {
        let skip = top - lag;
        let r: Vec<&[f64]> = restricted.iter().map(|v| &v[skip..]).collect();
        let mut score = fit_ar(&x[skip..], &r, lag)?.bic;
        if y.is_some() {
            let u: Vec<&[f64]> = unrestricted.iter().map(|v| &v[skip..]).collect();
            score += fit_ar(&x[skip..], &u, lag)?.bic;
        }
        if best.is_none_or(|(b, _)| score < b) {
            best = Some((score, lag));
        }
    }
    Ok(best.expect("lag 1 is feasible").1)
}
