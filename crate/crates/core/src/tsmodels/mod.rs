//! Automated univariate forecasting: random walk, exponential smoothing,
//! ARIMA with AIC order search, and the mapping from a predictive
//! distribution onto an IFP's option bins.

mod arima;
mod bins;
mod ets;
pub mod optim;

use chrono::Months;
use serde::{Deserialize, Serialize};

use crate::domain::Day;
use crate::error::{Error, Result};

pub use arima::{auto_arima, auto_arima_with, fit_arima, is_invertible, ArimaOrder, AutoArimaConfig, MAX_D, MAX_PQ};
pub use bins::{
    apply_floor, bin_probabilities, distribution_for_ifp, phe2, phe2_windowed, phe2_with, to_option_probs, Phe2Forecast,
    PROBABILITY_FLOOR,
};
pub use ets::{fit_ets, fit_holt, fit_random_walk, fit_ses, ALPHA_GRID};

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequency {
    #[default]
    Daily,
    Weekly,
    Monthly,
}

impl Frequency {
    fn advance(self, day: Day, steps: u32) -> Day {
        match self {
            Frequency::Daily => day.offset(steps as i32),
            Frequency::Weekly => day.offset(7 * steps as i32),
            Frequency::Monthly => Day::from_date(day.to_date() + Months::new(steps)),
        }
    }
}

/// Regularly spaced univariate series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub id: String,
    pub frequency: Frequency,
    observations: Vec<(Day, f64)>,
}

impl Series {
    /// Builds a series from observations that already sit on the frequency grid.
    pub fn regular(id: impl Into<String>, frequency: Frequency, observations: Vec<(Day, f64)>) -> Result<Series> {
        for w in observations.windows(2) {
            if frequency.advance(w[0].0, 1) != w[1].0 {
                return Err(Error::InvalidSeries(format!(
                    "observation at {} is not one step after {}",
                    w[1].0, w[0].0
                )));
            }
        }
        check_finite(&observations)?;
        Ok(Series { id: id.into(), frequency, observations })
    }

    /// Daily series from consecutive values starting at `start`.
    pub fn from_values(id: impl Into<String>, start: Day, values: &[f64]) -> Result<Series> {
        let obs = values.iter().enumerate().map(|(i, &v)| (start.offset(i as i32), v)).collect();
        Series::regular(id, Frequency::Daily, obs)
    }

    /// Resamples irregular observations onto the frequency grid starting at
    /// the first observation, carrying the last observation forward.
    pub fn resample(id: impl Into<String>, frequency: Frequency, mut raw: Vec<(Day, f64)>) -> Result<Series> {
        raw.sort_by_key(|(d, _)| *d);
        if raw.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidSeries("duplicate observation day".into()));
        }
        check_finite(&raw)?;
        let Some(&(first, _)) = raw.first() else {
            return Ok(Series { id: id.into(), frequency, observations: Vec::new() });
        };
        let last = raw.last().unwrap().0;
        let mut obs = Vec::new();
        let mut next = 0;
        let mut current = raw[0].1;
        let mut step = 0;
        loop {
            let day = frequency.advance(first, step);
            if day > last {
                break;
            }
            while next < raw.len() && raw[next].0 <= day {
                current = raw[next].1;
                next += 1;
            }
            obs.push((day, current));
            step += 1;
        }
        Ok(Series { id: id.into(), frequency, observations: obs })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &[(Day, f64)] {
        &self.observations
    }

    pub fn values(&self) -> Vec<f64> {
        self.observations.iter().map(|(_, v)| *v).collect()
    }

    pub fn last_day(&self) -> Option<Day> {
        self.observations.last().map(|(d, _)| *d)
    }

    /// Observations on or before `day`.
    pub fn truncated(&self, day: Day) -> Series {
        let n = self.observations.partition_point(|(d, _)| *d <= day);
        Series {
            id: self.id.clone(),
            frequency: self.frequency,
            observations: self.observations[..n].to_vec(),
        }
    }

    /// The last `n` observations.
    pub fn tail(&self, n: usize) -> Series {
        let start = self.observations.len().saturating_sub(n);
        Series {
            id: self.id.clone(),
            frequency: self.frequency,
            observations: self.observations[start..].to_vec(),
        }
    }

    /// Number of grid steps after the last observation needed to reach `day`
    /// (0 if `day` is already covered).
    pub fn steps_until(&self, day: Day) -> usize {
        let Some(last) = self.last_day() else { return 0 };
        let mut steps = 0;
        while self.frequency.advance(last, steps) < day {
            steps += 1;
        }
        steps as usize
    }

    /// Day of the `step`-th grid point after the last observation.
    pub fn day_after(&self, step: usize) -> Option<Day> {
        self.last_day().map(|d| self.frequency.advance(d, step as u32))
    }
}

fn check_finite(obs: &[(Day, f64)]) -> Result<()> {
    match obs.iter().find(|(_, v)| !v.is_finite()) {
        Some((d, _)) => Err(Error::InvalidSeries(format!("non-finite value on {d}"))),
        None => Ok(()),
    }
}

/// Lower bound on residual variance, scaled to the series level.
pub fn variance_floor(last_value: f64) -> f64 {
    1e-8 * (1.0 + last_value.abs()).powi(2)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelFamily {
    RandomWalk,
    Ses,
    Holt,
    Arima { p: usize, d: usize, q: usize },
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelFamily::RandomWalk => f.write_str("random_walk"),
            ModelFamily::Ses => f.write_str("ses"),
            ModelFamily::Holt => f.write_str("holt"),
            ModelFamily::Arima { p, d, q } => write!(f, "arima({p},{d},{q})"),
        }
    }
}

/// State needed to extend a fitted model past the end of its data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub(crate) enum ForecastState {
    RandomWalk {
        last: f64,
    },
    Ses {
        level: f64,
        alpha: f64,
    },
    Holt {
        level: f64,
        trend: f64,
        alpha: f64,
        beta: f64,
    },
    Arima {
        ar: Vec<f64>,
        ma: Vec<f64>,
        mean: f64,
        /// Tail of the differenced series, most recent last.
        w_tail: Vec<f64>,
        /// Tail of the CSS residuals, most recent last.
        e_tail: Vec<f64>,
        /// Last value of the k-times differenced series for k = 0..d.
        levels: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub family: ModelFamily,
    pub parameters: Vec<f64>,
    pub residual_variance: f64,
    pub aic: f64,
    pub training_n: usize,
    pub(crate) state: ForecastState,
}

/// Normal predictive distribution `horizon` steps ahead.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub horizon: usize,
    pub mean: f64,
    pub variance: f64,
}

impl PredictiveDistribution {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

impl FittedModel {
    /// Predictive distributions for steps 1..=horizon.
    pub fn forecast(&self, horizon: usize) -> Vec<PredictiveDistribution> {
        let sigma2 = self.residual_variance;
        let mk = |h: usize, mean: f64, var: f64| PredictiveDistribution { horizon: h, mean, variance: var };
        match &self.state {
            ForecastState::RandomWalk { last } => {
                (1..=horizon).map(|h| mk(h, *last, h as f64 * sigma2)).collect()
            }
            ForecastState::Ses { level, alpha } => (1..=horizon)
                .map(|h| mk(h, *level, sigma2 * (1.0 + (h as f64 - 1.0) * alpha * alpha)))
                .collect(),
            ForecastState::Holt { level, trend, alpha, beta } => {
                let mut acc = 1.0;
                (1..=horizon)
                    .map(|h| {
                        if h > 1 {
                            let c = alpha * (1.0 + (h as f64 - 1.0) * beta);
                            acc += c * c;
                        }
                        mk(h, level + h as f64 * trend, sigma2 * acc)
                    })
                    .collect()
            }
            ForecastState::Arima { ar, ma, mean, w_tail, e_tail, levels } => {
                let means = arima::forecast_means(ar, ma, *mean, w_tail, e_tail, levels, horizon);
                let psi = arima::psi_weights(ar, ma, levels.len(), horizon);
                let mut acc = 0.0;
                means
                    .into_iter()
                    .enumerate()
                    .map(|(i, m)| {
                        acc += psi[i] * psi[i];
                        mk(i + 1, m, sigma2 * acc)
                    })
                    .collect()
            }
        }
    }

    /// Model dump for audit output.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("fitted model serializes")
    }
}
