use super::{variance_floor, FittedModel, ForecastState, ModelFamily, Series};
use crate::error::{Error, Result};
use crate::stats;

/// Smoothing-parameter grid 0.05, 0.10, ..., 0.95.
pub const ALPHA_GRID: [f64; 19] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90,
    0.95,
];

/// Forecast mean is the last value; residual variance is the sample
/// variance of first differences.
pub fn fit_random_walk(series: &Series) -> Result<FittedModel> {
    let y = series.values();
    if y.len() < 3 {
        return Err(Error::SeriesTooShort { need: 3, got: y.len() });
    }
    let diffs: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let last = *y.last().unwrap();
    let var = stats::sample_variance(&diffs).unwrap_or(0.0).max(variance_floor(last));
    let sse: f64 = diffs.iter().map(|d| d * d).sum();
    let n = diffs.len() as f64;
    Ok(FittedModel {
        family: ModelFamily::RandomWalk,
        parameters: Vec::new(),
        residual_variance: var,
        aic: n * (sse.max(sse_floor(last, diffs.len())) / n).ln() + 2.0,
        training_n: y.len(),
        state: ForecastState::RandomWalk { last },
    })
}

fn sse_floor(last: f64, n: usize) -> f64 {
    variance_floor(last) * n as f64
}

/// One-step errors are scored from the third observation on for both smoothing
/// forms so their AICs compare the same data.
const ETS_BURN_IN: usize = 2;

fn ses_pass(y: &[f64], alpha: f64) -> (f64, f64) {
    let mut level = y[0];
    let mut sse = 0.0;
    for (t, &obs) in y.iter().enumerate().skip(1) {
        let err = obs - level;
        if t >= ETS_BURN_IN {
            sse += err * err;
        }
        level += alpha * err;
    }
    (level, sse)
}

fn holt_pass(y: &[f64], alpha: f64, beta: f64) -> (f64, f64, f64) {
    let mut level = y[1];
    let mut trend = y[1] - y[0];
    let mut sse = 0.0;
    for &obs in &y[ETS_BURN_IN..] {
        let err = obs - (level + trend);
        sse += err * err;
        let new_level = level + trend + alpha * err;
        trend = beta * (new_level - level) + (1.0 - beta) * trend;
        level = new_level;
    }
    (level, trend, sse)
}

fn aic(sse: f64, n: usize, k: usize, last: f64) -> f64 {
    let sse = sse.max(sse_floor(last, n));
    n as f64 * (sse / n as f64).ln() + 2.0 * k as f64
}

fn check_len(y: &[f64]) -> Result<()> {
    if y.len() < 8 {
        Err(Error::SeriesTooShort { need: 8, got: y.len() })
    } else {
        Ok(())
    }
}

/// Simple exponential smoothing with alpha on the grid; ties go to the smallest alpha.
pub fn fit_ses(series: &Series) -> Result<FittedModel> {
    let y = series.values();
    check_len(&y)?;
    let last = *y.last().unwrap();
    let mut best: Option<(f64, f64, f64)> = None;
    for &alpha in &ALPHA_GRID {
        let (level, sse) = ses_pass(&y, alpha);
        if best.is_none_or(|(_, _, s)| sse < s) {
            best = Some((alpha, level, sse));
        }
    }
    let (alpha, level, sse) = best.unwrap();
    let n = y.len() - ETS_BURN_IN;
    Ok(FittedModel {
        family: ModelFamily::Ses,
        parameters: vec![alpha],
        residual_variance: (sse / n as f64).max(variance_floor(last)),
        aic: aic(sse, n, 2, last),
        training_n: y.len(),
        state: ForecastState::Ses { level, alpha },
    })
}

/// Holt's linear trend method over the (alpha, beta) grid.
pub fn fit_holt(series: &Series) -> Result<FittedModel> {
    let y = series.values();
    check_len(&y)?;
    let last = *y.last().unwrap();
    let mut best: Option<(f64, f64, f64, f64, f64)> = None;
    for &alpha in &ALPHA_GRID {
        for &beta in &ALPHA_GRID {
            let (level, trend, sse) = holt_pass(&y, alpha, beta);
            if best.is_none_or(|b| sse < b.4) {
                best = Some((alpha, beta, level, trend, sse));
            }
        }
    }
    let (alpha, beta, level, trend, sse) = best.unwrap();
    let n = y.len() - ETS_BURN_IN;
    Ok(FittedModel {
        family: ModelFamily::Holt,
        parameters: vec![alpha, beta],
        residual_variance: (sse / n as f64).max(variance_floor(last)),
        aic: aic(sse, n, 4, last),
        training_n: y.len(),
        state: ForecastState::Holt { level, trend, alpha, beta },
    })
}

/// Chooses between simple and trend exponential smoothing by AIC.
pub fn fit_ets(series: &Series) -> Result<FittedModel> {
    let ses = fit_ses(series)?;
    let holt = fit_holt(series)?;
    Ok(if holt.aic < ses.aic { holt } else { ses })
}
