//! ARIMA(p, d, q) by conditional sum of squares and AIC order search.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::optim::NelderMead;
use super::{fit_random_walk, variance_floor, FittedModel, ForecastState, ModelFamily, Series};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::stats;

pub const MAX_PQ: usize = 3;
pub const MAX_D: usize = 2;
/// Roots of the AR and MA polynomials must lie outside this radius.
const ROOT_RADIUS: f64 = 1.001;
/// An AR and an MA inverse root closer than this cancel out.
const COMMON_ROOT_TOL: f64 = 0.1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

/// True when every root of `1 - c1 z - ... - ck z^k` lies outside `radius`.
/// Uses the Schur-Cohn step-down recursion on the rescaled coefficients.
pub fn is_invertible(coeffs: &[f64], radius: f64) -> bool {
    let mut a: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c * radius.powi(i as i32 + 1))
        .collect();
    while let Some(&k) = a.last() {
        if !k.is_finite() || k.abs() >= 1.0 {
            return false;
        }
        let m = a.len();
        let denom = 1.0 - k * k;
        let prev: Vec<f64> = (0..m - 1).map(|i| (a[i] + k * a[m - 2 - i]) / denom).collect();
        a = prev;
    }
    true
}

fn ar_ok(ar: &[f64]) -> bool {
    is_invertible(ar, ROOT_RADIUS)
}

fn ma_ok(ma: &[f64]) -> bool {
    let neg: Vec<f64> = ma.iter().map(|t| -t).collect();
    is_invertible(&neg, ROOT_RADIUS)
}

/// Roots of the monic polynomial `x^k + c1 x^(k-1) + ... + ck`
/// by Durand-Kerner iteration.
fn monic_roots(c: &[f64]) -> Vec<Complex64> {
    let k = c.len();
    let eval = |x: Complex64| c.iter().fold(Complex64::new(1.0, 0.0), |acc, ci| acc * x + ci);
    let seed = Complex64::new(0.4, 0.9);
    let mut r: Vec<Complex64> = (0..k).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..500 {
        let mut moved: f64 = 0.0;
        for i in 0..k {
            let denom = (0..k).filter(|&j| j != i).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (r[i] - r[j]));
            if denom.norm() == 0.0 {
                continue;
            }
            let step = eval(r[i]) / denom;
            r[i] -= step;
            moved = moved.max(step.norm());
        }
        if moved < 1e-14 {
            break;
        }
    }
    r
}

/// True when the AR and MA parts share a near-identical factor. Such a
/// model is not identified: the pair cancels and mimics a smaller order.
fn has_common_factor(ar: &[f64], ma: &[f64]) -> bool {
    if ar.is_empty() || ma.is_empty() {
        return false;
    }
    // Inverse roots of 1 - sum(ar z^i) and 1 + sum(ma z^j).
    let neg: Vec<f64> = ar.iter().map(|a| -a).collect();
    let a = monic_roots(&neg);
    let m = monic_roots(ma);
    a.iter().any(|x| m.iter().any(|y| (x - y).norm() < COMMON_ROOT_TOL))
}

/// Differences `y` d times; also returns the last value of each
/// intermediate series (k = 0..d) for integrating forecasts back.
fn difference(y: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut w = y.to_vec();
    let mut levels = Vec::with_capacity(d);
    for _ in 0..d {
        levels.push(*w.last().unwrap());
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    (w, levels)
}

/// CSS residuals of a centred series; the first `p` residuals are zero.
fn css_residuals(z: &[f64], ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let p = ar.len();
    let mut e = vec![0.0; z.len()];
    for t in p..z.len() {
        let mut pred = 0.0;
        for (i, phi) in ar.iter().enumerate() {
            pred += phi * z[t - 1 - i];
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j {
                pred += theta * e[t - 1 - j];
            }
        }
        e[t] = z[t] - pred;
    }
    e
}

fn css(z: &[f64], ar: &[f64], ma: &[f64]) -> f64 {
    css_residuals(z, ar, ma)[ar.len()..].iter().map(|e| e * e).sum()
}

/// Fits ARIMA(p, d, q). With d = 0 the series mean is estimated; with
/// d > 0 the differenced series is taken as zero-mean.
pub fn fit_arima(series: &Series, p: usize, d: usize, q: usize) -> Result<FittedModel> {
    let y = series.values();
    if p > MAX_PQ || q > MAX_PQ || d > MAX_D {
        return Err(Error::ModelRejected(format!("order ({p},{d},{q}) outside the search grid")));
    }
    if y.len() < d || y.len() - d <= p + q + 2 {
        return Err(Error::SeriesTooShort { need: p + q + d + 3, got: y.len() });
    }
    let last = *y.last().unwrap();
    let (w, levels) = difference(&y, d);
    let mean = if d == 0 { stats::mean(&w).unwrap() } else { 0.0 };
    let z: Vec<f64> = w.iter().map(|v| v - mean).collect();

    let coeffs = if p + q == 0 {
        Vec::new()
    } else {
        let objective = |x: &[f64]| {
            let (ar, ma) = x.split_at(p);
            if !ar_ok(ar) || !ma_ok(ma) {
                return f64::INFINITY;
            }
            css(&z, ar, ma)
        };
        let nm = NelderMead { initial_step: 0.1, max_evals: 400 * (p + q), f_tol: 1e-10 };
        nm.minimize(&vec![0.0; p + q], objective).x
    };
    let (ar, ma) = coeffs.split_at(p);
    if !ar_ok(ar) {
        return Err(Error::ModelRejected(format!("non-stationary AR part in ({p},{d},{q})")));
    }
    if !ma_ok(ma) {
        return Err(Error::ModelRejected(format!("non-invertible MA part in ({p},{d},{q})")));
    }
    if has_common_factor(ar, ma) {
        return Err(Error::ModelRejected(format!("AR and MA parts cancel in ({p},{d},{q})")));
    }
    let e = css_residuals(&z, ar, ma);
    let resid = &e[p..];
    // Every order is scored on the same stretch of the original series so
    // that AICs across the grid compare like with like.
    let scored = &e[(MAX_PQ + MAX_D - d).max(p).min(e.len() - 1)..];
    let sse: f64 = scored.iter().map(|r| r * r).sum();
    if !sse.is_finite() {
        return Err(Error::ModelRejected(format!("non-finite fit for ({p},{d},{q})")));
    }
    let n = scored.len();
    let floor = variance_floor(last);
    let aic = n as f64 * (sse.max(floor * n as f64) / n as f64).ln() + 2.0 * (p + q + 1) as f64;
    let residual_variance = stats::sample_variance(resid).unwrap_or(0.0).max(floor);

    let keep = |v: &[f64], k: usize| v[v.len().saturating_sub(k.max(1))..].to_vec();
    let mut parameters = Vec::with_capacity(p + q + 1);
    parameters.push(mean);
    parameters.extend_from_slice(&coeffs);
    Ok(FittedModel {
        family: ModelFamily::Arima { p, d, q },
        parameters,
        residual_variance,
        aic,
        training_n: y.len(),
        state: ForecastState::Arima {
            ar: ar.to_vec(),
            ma: ma.to_vec(),
            mean,
            w_tail: keep(&w, p),
            e_tail: keep(&e, q),
            levels,
        },
    })
}

pub(crate) fn forecast_means(
    ar: &[f64],
    ma: &[f64],
    mean: f64,
    w_tail: &[f64],
    e_tail: &[f64],
    levels: &[f64],
    horizon: usize,
) -> Vec<f64> {
    let mut z: Vec<f64> = w_tail.iter().map(|v| v - mean).collect();
    let mut e = e_tail.to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let t = z.len();
        let mut pred = 0.0;
        for (i, phi) in ar.iter().enumerate() {
            pred += phi * z[t - 1 - i];
        }
        let te = e.len();
        for (j, theta) in ma.iter().enumerate() {
            if te > j {
                pred += theta * e[te - 1 - j];
            }
        }
        z.push(pred);
        e.push(0.0);
        out.push(pred + mean);
    }
    for &level in levels.iter().rev() {
        let mut acc = level;
        for v in out.iter_mut() {
            acc += *v;
            *v = acc;
        }
    }
    out
}

/// MA(infinity) weights of the integrated model, psi_0 .. psi_{h-1}.
pub(crate) fn psi_weights(ar: &[f64], ma: &[f64], d: usize, horizon: usize) -> Vec<f64> {
    // Polynomial 1 - sum(ar_i B^i), multiplied by (1 - B)^d.
    let mut poly: Vec<f64> = std::iter::once(1.0).chain(ar.iter().map(|a| -a)).collect();
    for _ in 0..d {
        let mut next = vec![0.0; poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c;
        }
        poly = next;
    }
    let a: Vec<f64> = poly[1..].iter().map(|c| -c).collect();
    let mut psi = vec![0.0; horizon.max(1)];
    psi[0] = 1.0;
    for j in 1..psi.len() {
        let mut v = if j <= ma.len() { ma[j - 1] } else { 0.0 };
        for (i, ai) in a.iter().enumerate().take(j) {
            v += ai * psi[j - 1 - i];
        }
        psi[j] = v;
    }
    psi.truncate(horizon);
    psi
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoArimaConfig {
    pub max_p: usize,
    pub max_d: usize,
    pub max_q: usize,
}

impl Default for AutoArimaConfig {
    fn default() -> Self {
        AutoArimaConfig { max_p: MAX_PQ, max_d: MAX_D, max_q: MAX_PQ }
    }
}

/// Minimum-AIC ARIMA over the full order grid.
pub fn auto_arima(series: &Series) -> Result<FittedModel> {
    auto_arima_with(series, &AutoArimaConfig::default(), Exec::Sequential)
}

/// Grid search over orders up to the configured maxima. Candidates that fail
/// to fit are skipped; ties go to the lexicographically smallest (p, d, q).
/// Falls back to the random walk when no candidate fits.
pub fn auto_arima_with(series: &Series, config: &AutoArimaConfig, exec: Exec) -> Result<FittedModel> {
    if series.len() < 12 {
        return Err(Error::SeriesTooShort { need: 12, got: series.len() });
    }
    let mut orders = Vec::new();
    for p in 0..=config.max_p.min(MAX_PQ) {
        for d in 0..=config.max_d.min(MAX_D) {
            for q in 0..=config.max_q.min(MAX_PQ) {
                orders.push(ArimaOrder { p, d, q });
            }
        }
    }
    let fits = exec.map(&orders, |o| fit_arima(series, o.p, o.d, o.q).ok());
    let mut best: Option<FittedModel> = None;
    for fit in fits.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| fit.aic < b.aic) {
            best = Some(fit);
        }
    }
    match best {
        Some(b) => Ok(b),
        None => fit_random_walk(series),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Day;
    use crate::tsmodels::fit_random_walk;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn series(v: &[f64]) -> Series {
        Series::from_values("t", Day(0), v).unwrap()
    }

    fn ar_data(phi: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let burn = 200;
        let mut x = vec![0.0; n + burn];
        for t in 0..n + burn {
            let mut v: f64 = StandardNormal.sample(&mut rng);
            for (i, p) in phi.iter().enumerate() {
                if t > i {
                    v += p * x[t - 1 - i];
                }
            }
            x[t] = v;
        }
        x.split_off(burn)
    }

    #[test]
    fn step_down_matches_known_roots() {
        // 1 - 0.5z: root at 2.
        assert!(is_invertible(&[0.5], 1.001));
        let mut roots: Vec<f64> = monic_roots(&[-0.5, -0.24]).iter().map(|r| r.re).collect();
        roots.sort_by(f64::total_cmp);
        assert!((roots[0] + 0.3).abs() < 1e-12 && (roots[1] - 0.8).abs() < 1e-12);
        assert!(has_common_factor(&[0.6], &[-0.62]));
        assert!(!has_common_factor(&[0.6], &[0.3]));
        assert!(!has_common_factor(&[0.6], &[]));
        // 1 - 1.0z: unit root.
        assert!(!is_invertible(&[1.0], 1.001));
        // 1 - 0.9995z: root at 1.0005, inside the 1.001 margin.
        assert!(!is_invertible(&[0.9995], 1.001));
        // (1 - 0.5z)(1 - 0.4z) = 1 - 0.9z + 0.2z^2.
        assert!(is_invertible(&[0.9, -0.2], 1.001));
        // (1 - 1.25z)(1 - 0.5z) = 1 - 1.75z + 0.625z^2: root at 0.8.
        assert!(!is_invertible(&[1.75, -0.625], 1.001));
        assert!(is_invertible(&[], 1.001));
    }

    #[test]
    fn ar1_recovery() {
        let m = fit_arima(&series(&ar_data(&[0.6], 500, 1)), 1, 0, 0).unwrap();
        assert!((m.parameters[1] - 0.6).abs() < 0.1, "{:?}", m.parameters);
    }

    #[test]
    fn mean_model() {
        let v = [1.0, 3.0, 2.0, 4.0, 5.0, 3.0];
        let m = fit_arima(&series(&v), 0, 0, 0).unwrap();
        let f = m.forecast(2);
        assert!((f[0].mean - 3.0).abs() < 1e-12);
        assert!((f[1].variance - stats::sample_variance(&v).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn order_010_equals_random_walk() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut level = 0.0;
        let v: Vec<f64> = (0..100)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                level += e;
                level
            })
            .collect();
        let a = fit_arima(&series(&v), 0, 1, 0).unwrap();
        let r = fit_random_walk(&series(&v)).unwrap();
        assert_eq!(a.residual_variance, r.residual_variance);
        assert_eq!(a.forecast(5), r.forecast(5));
    }

    #[test]
    fn precondition_and_grid_limits() {
        assert!(matches!(fit_arima(&series(&[1.0; 6]), 2, 1, 1), Err(Error::SeriesTooShort { .. })));
        assert!(fit_arima(&series(&[1.0; 30]), 4, 0, 0).is_err());
        assert!(matches!(auto_arima(&series(&[1.0; 11])), Err(Error::SeriesTooShort { need: 12, got: 11 })));
    }

    #[test]
    fn psi_weights_known_cases() {
        // AR(1): psi_j = phi^j.
        let psi = psi_weights(&[0.5], &[], 0, 4);
        assert_eq!(psi, vec![1.0, 0.5, 0.25, 0.125]);
        // Random walk: all ones.
        assert_eq!(psi_weights(&[], &[], 1, 3), vec![1.0; 3]);
        // MA(1): 1, theta, 0, ...
        assert_eq!(psi_weights(&[], &[0.4], 0, 3), vec![1.0, 0.4, 0.0]);
        // ARIMA(0,2,0): 1, 2, 3, ...
        assert_eq!(psi_weights(&[], &[], 2, 4), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn integrated_forecast_of_ramp() {
        let v: Vec<f64> = (0..40).map(|t| 2.0 * t as f64 + 1.0).collect();
        let m = fit_arima(&series(&v), 0, 2, 0).unwrap();
        let f = m.forecast(3);
        assert!((f[0].mean - 81.0).abs() < 1e-9);
        assert!((f[2].mean - 85.0).abs() < 1e-9);
    }

    #[test]
    fn auto_arima_aic_is_minimum() {
        let s = series(&ar_data(&[0.5], 120, 9));
        let best = auto_arima(&s).unwrap();
        for p in 0..=3 {
            for d in 0..=2 {
                for q in 0..=3 {
                    if let Ok(m) = fit_arima(&s, p, d, q) {
                        assert!(best.aic <= m.aic);
                    }
                }
            }
        }
    }

    #[test]
    fn auto_arima_ar2() {
        let mut hits = 0;
        for seed in 0..5 {
            let m = auto_arima(&series(&ar_data(&[0.5, 0.3], 800, 100 + seed))).unwrap();
            if let ModelFamily::Arima { p, d, .. } = m.family {
                if p >= 1 && d == 0 {
                    hits += 1;
                }
            }
        }
        assert!(hits >= 4, "{hits}/5");
    }
}
