use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as StdNormal};

use super::config::{SeriesParams, SimConfig};
use crate::domain::{Day, HorizonKind, Ifp, IfpKind};
use crate::error::Result;
use crate::stats;
use crate::tsmodels::{apply_floor, bin_probabilities, variance_floor, Series, PROBABILITY_FLOOR};

pub(crate) const STREAM_WORLD: u64 = 1;
pub(crate) const STREAM_FORECASTER: u64 = 2;
pub(crate) const STREAM_SPARSITY: u64 = 3;

/// Independent ChaCha stream for one simulated entity.
pub(crate) fn stream(seed: u64, kind: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind << 40) | index);
    rng
}

pub fn season_start() -> Day {
    Day::from_date(NaiveDate::from_ymd_opt(2018, 1, 1).unwrap())
}

/// One generated question with everything needed to forecast and resolve it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimIfp {
    pub ifp: Ifp,
    /// Full realized series through the close date, for series questions.
    pub series: Option<Series>,
    /// Generating probabilities, for nominal questions.
    pub base_rates: Option<Vec<f64>>,
    /// Realized value the question resolves on.
    pub realized: Option<f64>,
    /// True posterior option probabilities for each active day.
    pub truth: Vec<Vec<f64>>,
}

impl SimIfp {
    pub fn truth_on(&self, day: Day) -> Option<&[f64]> {
        if !self.ifp.is_active(day) {
            return None;
        }
        self.truth.get(day.since(self.ifp.open_date) as usize).map(Vec::as_slice)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub ifps: Vec<SimIfp>,
}

impl World {
    pub fn calendar(&self) -> (Day, Day) {
        let first = self.ifps.iter().map(|i| i.ifp.open_date).min().unwrap_or(season_start());
        let last = self.ifps.iter().map(|i| i.ifp.close_date).max().unwrap_or(first);
        (first, last)
    }
}

/// Location of the untruncated normal whose lower-clamped mean equals `target`.
pub fn clamped_normal_location(target: f64, sd: f64, min: f64) -> f64 {
    let n = StdNormal::new(0.0, 1.0).unwrap();
    let clamped_mean = |mu: f64| {
        let z = (min - mu) / sd;
        mu + sd * (z * n.cdf(z) + n.pdf(z))
    };
    let (mut lo, mut hi) = (min - 10.0 * sd, target);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clamped_mean(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bin of `value` under the `(t_{i-1}, t_i]` convention.
pub fn bin_of(value: f64, thresholds: &[f64]) -> usize {
    thresholds.iter().filter(|t| value > **t).count()
}

fn increasing(mut qs: Vec<f64>) -> Vec<f64> {
    for i in 1..qs.len() {
        let min = qs[i - 1] + 1e-6 * (1.0 + qs[i - 1].abs());
        if qs[i] < min {
            qs[i] = min;
        }
    }
    qs
}

fn gen_path(p: &SeriesParams, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let noise = Normal::new(0.0, p.noise_sd.max(0.0)).unwrap();
    let mut y = Vec::with_capacity(n);
    let mut level = p.start_level;
    let mut dy = p.drift;
    for _ in 0..n {
        let e: f64 = if p.noise_sd > 0.0 { noise.sample(rng) } else { 0.0 };
        dy = p.drift + p.phi * (dy - p.drift) + e;
        level += dy;
        y.push(level);
    }
    y
}

/// Exact normal distribution of the resolution quantity given observations
/// through index `d` of `y`, for an IFP whose window is `[a, t]` in indices.
pub fn exact_distribution(p: &SeriesParams, y: &[f64], d: usize, a: usize, t: usize, kind: HorizonKind) -> (f64, f64) {
    let h = t.saturating_sub(d);
    let u = if d > 0 { y[d] - y[d - 1] - p.drift } else { 0.0 };
    // g[m] = 1 + phi + ... + phi^m
    let mut g = Vec::with_capacity(h + 1);
    let mut acc = 0.0;
    let mut pow = 1.0;
    for _ in 0..=h {
        acc += pow;
        pow *= p.phi;
        g.push(acc);
    }
    let s2 = p.noise_sd * p.noise_sd;
    // mean of y_{d+k}: y_d + k drift + u (g[k] - 1)
    let mean_k = |k: usize| y[d] + k as f64 * p.drift + u * (g[k] - 1.0);
    match kind {
        HorizonKind::ValueAtClose => {
            if h == 0 {
                return (y[t], 0.0);
            }
            let var: f64 = (1..=h).map(|j| g[h - j] * g[h - j]).sum::<f64>() * s2;
            (mean_k(h), var)
        }
        HorizonKind::SumOverWindow => {
            let observed: f64 = y[a..=d.min(t)].iter().sum();
            if h == 0 {
                return (observed, 0.0);
            }
            let future: f64 = (1..=h).map(mean_k).sum();
            let mut cum = Vec::with_capacity(h);
            let mut c = 0.0;
            for gi in g.iter().take(h) {
                c += gi;
                cum.push(c);
            }
            let var: f64 = (1..=h).map(|j| cum[h - j] * cum[h - j]).sum::<f64>() * s2;
            (observed + future, var)
        }
    }
}

/// Option probabilities of a normal distribution, floored like machine output.
pub(crate) fn floored_bins(mean: f64, var: f64, thresholds: &[f64]) -> Vec<f64> {
    let var = var.max(variance_floor(mean) * 1e-6);
    let raw = bin_probabilities(mean, var, thresholds).expect("positive variance");
    apply_floor(&raw, PROBABILITY_FLOOR)
}

fn pick_kind(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> IfpKind {
    let k = &cfg.kinds;
    let total = k.binary + k.ordinal + k.nominal;
    let u = rng.random::<f64>() * total;
    if u < k.binary {
        IfpKind::Binary
    } else if u < k.binary + k.ordinal {
        IfpKind::Ordinal
    } else {
        IfpKind::Nominal
    }
}

fn gen_ifp(cfg: &SimConfig, index: usize, mu_duration: f64) -> Result<SimIfp> {
    let mut rng = stream(cfg.seed, STREAM_WORLD, index as u64);
    let start = season_start();
    let kind = pick_kind(cfg, &mut rng);
    let dur_dist = Normal::new(mu_duration, cfg.duration.sd).unwrap();
    let raw: f64 = dur_dist.sample(&mut rng);
    let duration = raw.max(cfg.duration.min as f64).round() as i32;
    let open = start.offset(rng.random_range(0..cfg.open_span_days.max(1)) as i32);
    // Close dates snap to a weekly grid so questions resolve in batches.
    let target = open.offset(duration).since(start);
    let mut close = start.offset(7 * ((target as f64 / 7.0).round() as i32));
    while close.since(open) < cfg.duration.min as i32 {
        close = close.offset(7);
    }
    let c = match kind {
        IfpKind::Binary => 2,
        _ => rng.random_range(3..=5usize),
    };
    let id = format!("ifp{index:03}");
    let options: Vec<String> = (0..c).map(|i| format!("opt{i}")).collect();
    let mut ifp = Ifp {
        id: id.clone(),
        title: format!("Simulated question {index}"),
        options,
        kind,
        open_date: open,
        close_date: close,
        resolved_option: None,
        series_ref: None,
        thresholds: None,
        horizon_kind: HorizonKind::ValueAtClose,
    };
    let active = ifp.active_len();
    if kind == IfpKind::Nominal {
        let gamma = Gamma::new(cfg.nominal_concentration, 1.0).unwrap();
        let draws: Vec<f64> = (0..c).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        let rates: Vec<f64> = draws.iter().map(|g| g / total).collect();
        let u = rng.random::<f64>();
        let mut cum = 0.0;
        let mut outcome = c - 1;
        for (i, r) in rates.iter().enumerate() {
            cum += r;
            if u < cum {
                outcome = i;
                break;
            }
        }
        ifp.resolved_option = Some(outcome);
        let truth = apply_floor(&rates, PROBABILITY_FLOOR);
        return Ok(SimIfp {
            ifp,
            series: None,
            base_rates: Some(rates),
            realized: None,
            truth: vec![truth; active],
        });
    }
    if rng.random::<f64>() < cfg.sum_over_window_share {
        ifp.horizon_kind = HorizonKind::SumOverWindow;
    }
    let span = close.since(open) as usize;
    let history = (cfg.series.history_days as usize).max(3 * (span + 1));
    let path = gen_path(&cfg.series, history + span + 1, &mut rng);
    let a = history;
    let t = history + span;
    // Historical analogues of the resolution quantity, measured from the
    // last value before a window of the same length.
    let changes: Vec<f64> = match ifp.horizon_kind {
        HorizonKind::ValueAtClose => (1..a - span).map(|s| path[s + span] - path[s - 1]).collect(),
        HorizonKind::SumOverWindow => (1..a - span)
            .map(|s| path[s..=s + span].iter().sum::<f64>() - (span + 1) as f64 * path[s - 1])
            .collect(),
    };
    let base = match ifp.horizon_kind {
        HorizonKind::ValueAtClose => path[a - 1],
        HorizonKind::SumOverWindow => (span + 1) as f64 * path[a - 1],
    };
    let qs: Vec<f64> = (1..c)
        .map(|j| base + stats::quantile(&changes, j as f64 / c as f64).unwrap())
        .collect();
    let thresholds = increasing(qs);
    let realized = match ifp.horizon_kind {
        HorizonKind::ValueAtClose => path[t],
        HorizonKind::SumOverWindow => path[a..=t].iter().sum(),
    };
    ifp.resolved_option = Some(bin_of(realized, &thresholds));
    ifp.series_ref = Some(format!("series_{id}"));
    let truth = (0..active)
        .map(|k| {
            let (m, v) = exact_distribution(&cfg.series, &path, a + k, a, t, ifp.horizon_kind);
            floored_bins(m, v, &thresholds)
        })
        .collect();
    ifp.thresholds = Some(thresholds);
    let first_day = open.offset(-(history as i32));
    let series = Series::from_values(format!("series_{id}"), first_day, &path)?;
    Ok(SimIfp { ifp, series: Some(series), base_rates: None, realized: Some(realized), truth })
}

/// Generates every question of the tournament from the world streams.
pub fn gen_world(cfg: &SimConfig) -> Result<World> {
    cfg.validate()?;
    let mu = clamped_normal_location(cfg.duration.mean, cfg.duration.sd, cfg.duration.min as f64);
    let ifps = (0..cfg.n_ifps).map(|i| gen_ifp(cfg, i, mu)).collect::<Result<Vec<_>>>()?;
    Ok(World { ifps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::is_probability_vector;

    #[test]
    fn clamped_location_hits_target_mean() {
        let mu = clamped_normal_location(87.0, 56.0, 14.0);
        let mut rng = stream(1, 0, 0);
        let n = Normal::new(mu, 56.0).unwrap();
        let m: f64 = (0..200_000).map(|_| n.sample(&mut rng).max(14.0)).sum::<f64>() / 200_000.0;
        assert!((m - 87.0).abs() < 0.5, "{m}");
    }

    #[test]
    fn world_is_deterministic_and_consistent() {
        let cfg = SimConfig { n_ifps: 30, ..SimConfig::default() };
        let a = gen_world(&cfg).unwrap();
        let b = gen_world(&cfg).unwrap();
        assert_eq!(a, b);
        for s in &a.ifps {
            s.ifp.validate().unwrap();
            assert_eq!(s.truth.len(), s.ifp.active_len());
            assert!(s.truth.iter().all(|p| is_probability_vector(p)));
            if let (Some(v), Some(t)) = (s.realized, &s.ifp.thresholds) {
                assert_eq!(s.ifp.resolved_option, Some(bin_of(v, t)));
            }
        }
    }

    #[test]
    fn duration_mean_near_target() {
        let mut means = Vec::new();
        for seed in 0..5 {
            let cfg = SimConfig { seed, n_ifps: 398, machine: Default::default(), ..SimConfig::default() };
            let w = gen_world(&cfg).unwrap();
            let d: Vec<f64> = w.ifps.iter().map(|i| i.ifp.close_date.since(i.ifp.open_date) as f64).collect();
            means.push(stats::mean(&d).unwrap());
        }
        let m = stats::mean(&means).unwrap();
        assert!((m - 87.0).abs() < 6.0, "{m}");
    }

    #[test]
    fn zero_noise_resolves_deterministically() {
        let mut cfg = SimConfig { n_ifps: 20, ..SimConfig::default() };
        cfg.series.noise_sd = 0.0;
        cfg.kinds.nominal = 0.0;
        let w = gen_world(&cfg).unwrap();
        for s in &w.ifps {
            let series = s.series.as_ref().unwrap();
            let vals = series.values();
            for (i, v) in vals.iter().enumerate() {
                let expected = cfg.series.start_level + cfg.series.drift * (i + 1) as f64;
                assert!((v - expected).abs() < 1e-9);
            }
            let t = s.ifp.thresholds.as_ref().unwrap();
            assert_eq!(s.ifp.resolved_option, Some(bin_of(s.realized.unwrap(), t)));
        }
    }

    #[test]
    fn exact_distribution_matches_monte_carlo() {
        let p = SeriesParams { phi: 0.6, drift: 0.1, noise_sd: 1.0, start_level: 0.0, history_days: 30 };
        let mut rng = stream(9, 0, 0);
        let y = gen_path(&p, 40, &mut rng);
        let (d, a, t) = (30usize, 28usize, 37usize);
        for kind in [HorizonKind::ValueAtClose, HorizonKind::SumOverWindow] {
            let (m, v) = exact_distribution(&p, &y, d, a, t, kind);
            let noise = Normal::new(0.0, 1.0).unwrap();
            let n = 40_000;
            let mut xs = Vec::with_capacity(n);
            for _ in 0..n {
                let mut path = y[..=d].to_vec();
                let mut dy = y[d] - y[d - 1];
                for _ in d..t {
                    let e: f64 = noise.sample(&mut rng);
                    dy = p.drift + p.phi * (dy - p.drift) + e;
                    path.push(path.last().unwrap() + dy);
                }
                xs.push(match kind {
                    HorizonKind::ValueAtClose => path[t],
                    HorizonKind::SumOverWindow => path[a..=t].iter().sum(),
                });
            }
            let mm = stats::mean(&xs).unwrap();
            let vv = stats::sample_variance(&xs).unwrap();
            assert!((mm - m).abs() < 4.0 * (v / n as f64).sqrt(), "{kind:?} mean {mm} vs {m}");
            assert!((vv / v - 1.0).abs() < 0.05, "{kind:?} var {vv} vs {v}");
        }
    }
}
