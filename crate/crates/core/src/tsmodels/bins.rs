//! Mapping predictive distributions onto IFP option bins, and the
//! ARIMA + ETS probability-space ensemble.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{auto_arima_with, fit_ets, fit_random_walk, AutoArimaConfig, FittedModel, PredictiveDistribution, Series};
use crate::domain::{HorizonKind, Ifp};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Minimum probability assigned to any option before renormalization.
pub const PROBABILITY_FLOOR: f64 = 0.005;

/// Normal CDF differences at the thresholds, without flooring.
pub fn bin_probabilities(mean: f64, variance: f64, thresholds: &[f64]) -> Result<Vec<f64>> {
    if !(variance > 0.0) || !mean.is_finite() {
        return Err(Error::ModelRejected(format!("degenerate distribution N({mean}, {variance})")));
    }
    let normal = Normal::new(mean, variance.sqrt()).map_err(|e| Error::ModelRejected(e.to_string()))?;
    let mut out = Vec::with_capacity(thresholds.len() + 1);
    let mut prev = 0.0;
    for &t in thresholds {
        let c = normal.cdf(t);
        out.push((c - prev).max(0.0));
        prev = c;
    }
    out.push((1.0 - prev).max(0.0));
    Ok(out)
}

/// Clamps each entry to [floor, 1 - floor] and renormalizes.
pub fn apply_floor(probs: &[f64], floor: f64) -> Vec<f64> {
    let clamped: Vec<f64> = probs.iter().map(|p| p.clamp(floor, 1.0 - floor)).collect();
    let s: f64 = clamped.iter().sum();
    clamped.iter().map(|p| p / s).collect()
}

/// Option probabilities for `ifp` under a normal predictive distribution.
pub fn to_option_probs(dist: &PredictiveDistribution, ifp: &Ifp) -> Result<Vec<f64>> {
    let thresholds = ifp
        .thresholds
        .as_ref()
        .ok_or_else(|| Error::MissingThresholds(ifp.id.clone()))?;
    Ok(apply_floor(&bin_probabilities(dist.mean, dist.variance, thresholds)?, PROBABILITY_FLOOR))
}

/// Distribution of the quantity an IFP resolves on, given a model fitted to
/// `series`. Value-at-close uses the step covering the close date; sums over
/// the active window add observed values to forecast step means and sum step
/// variances (independent increments).
pub fn distribution_for_ifp(model: &FittedModel, series: &Series, ifp: &Ifp) -> Result<PredictiveDistribution> {
    let last = series
        .last_day()
        .ok_or_else(|| Error::InvalidSeries(format!("series {} is empty", series.id)))?;
    let steps = series.steps_until(ifp.close_date);
    match ifp.horizon_kind {
        HorizonKind::ValueAtClose => {
            if steps == 0 {
                let v = series
                    .observations()
                    .iter()
                    .rev()
                    .find(|(d, _)| *d <= ifp.close_date)
                    .map(|(_, v)| *v)
                    .unwrap_or(series.values()[0]);
                let var = model.residual_variance.max(super::variance_floor(v));
                return Ok(PredictiveDistribution { horizon: 0, mean: v, variance: var * 1e-6 });
            }
            Ok(*model.forecast(steps).last().unwrap())
        }
        HorizonKind::SumOverWindow => {
            let observed: f64 = series
                .observations()
                .iter()
                .filter(|(d, _)| ifp.is_active(*d))
                .map(|(_, v)| v)
                .sum();
            let path = model.forecast(steps);
            let mut mean = observed;
            let mut variance = 0.0;
            for (i, step) in path.iter().enumerate() {
                let day = series.day_after(i + 1).unwrap_or(last);
                if ifp.is_active(day) {
                    mean += step.mean;
                    variance += step.variance;
                }
            }
            let variance = variance.max(super::variance_floor(mean) * 1e-6);
            Ok(PredictiveDistribution { horizon: steps, mean, variance })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phe2Forecast {
    pub probs: Vec<f64>,
    /// Component models that contributed, in (arima, ets) order.
    pub components: Vec<FittedModel>,
}

pub fn phe2(series: &Series, ifp: &Ifp) -> Result<Phe2Forecast> {
    phe2_with(series, ifp, &AutoArimaConfig::default(), Exec::Sequential)
}

/// Mean of the auto-ARIMA and ETS option probabilities. A failing component
/// is dropped; if both fail the random walk is used.
pub fn phe2_with(series: &Series, ifp: &Ifp, arima: &AutoArimaConfig, exec: Exec) -> Result<Phe2Forecast> {
    phe2_windowed(series, ifp, arima, None, exec)
}

/// PHE2 fitted on the last `fit_window` observations only. Observed values
/// inside the question window still come from the full series.
pub fn phe2_windowed(
    series: &Series,
    ifp: &Ifp,
    arima: &AutoArimaConfig,
    fit_window: Option<usize>,
    exec: Exec,
) -> Result<Phe2Forecast> {
    let tail;
    let fit = match fit_window {
        Some(n) if n < series.len() => {
            tail = series.tail(n);
            &tail
        }
        _ => series,
    };
    if ifp.thresholds.is_none() {
        return Err(Error::MissingThresholds(ifp.id.clone()));
    }
    let component = |model: Result<FittedModel>| -> Option<(Vec<f64>, FittedModel)> {
        let m = model.ok()?;
        let dist = distribution_for_ifp(&m, series, ifp).ok()?;
        Some((to_option_probs(&dist, ifp).ok()?, m))
    };
    let mut parts: Vec<(Vec<f64>, FittedModel)> = [
        component(auto_arima_with(fit, arima, exec)),
        component(fit_ets(fit)),
    ]
    .into_iter()
    .flatten()
    .collect();
    if parts.is_empty() {
        let rw = fit_random_walk(fit)?;
        let dist = distribution_for_ifp(&rw, series, ifp)?;
        parts.push((to_option_probs(&dist, ifp)?, rw));
    }
    let c = ifp.n_options();
    let mut probs = vec![0.0; c];
    for (p, _) in &parts {
        for (acc, v) in probs.iter_mut().zip(p) {
            *acc += v / parts.len() as f64;
        }
    }
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
    Ok(Phe2Forecast { probs, components: parts.into_iter().map(|(_, m)| m).collect() })
}
