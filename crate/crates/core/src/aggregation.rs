//! Human forecast aggregation and human-machine combination.
//!
//! The pipeline for one IFP on one day: take each forecaster's standing
//! forecast, keep the most recent fraction of them, soften each one with a
//! power transform, average with weights from recency decay and forecaster
//! skill, sharpen the mean with a season-dependent power transform, then
//! blend with the machine forecast.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{latest_per_source, Day, Forecast, Ifp, Source, TournamentLog};
use crate::error::{Error, Result};
use crate::scoring::brier_for;
use crate::stats;

/// Linear interpolation between a start and end value over the season.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub start: f64,
    pub end: f64,
}

impl Schedule {
    pub const fn constant(v: f64) -> Self {
        Schedule { start: v, end: v }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.start + (self.end - self.start) * t
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineEquivalents {
    pub timeseries: f64,
    pub other: f64,
}

impl Default for MachineEquivalents {
    fn default() -> Self {
        MachineEquivalents { timeseries: 8.0, other: 4.0 }
    }
}

/// Coefficients for optional skill features added to the mean z-score.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkillFeatures {
    /// Subtracted per update per attempted IFP.
    pub update_frequency: f64,
    /// Added per unit of mean absolute update step.
    pub update_step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationConfig {
    pub recency_fraction: f64,
    pub min_forecasts_floor: usize,
    /// Per-day exponential decay rate.
    pub decay_rate: f64,
    pub skill_exponent: Schedule,
    pub individual_recalibration: f64,
    pub extremization: Schedule,
    pub machine_equivalents: MachineEquivalents,
    pub include_machine: bool,
    pub skill_features: SkillFeatures,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            recency_fraction: 0.4,
            min_forecasts_floor: 5,
            decay_rate: std::f64::consts::LN_2 / 14.0,
            skill_exponent: Schedule { start: 0.5, end: 2.0 },
            individual_recalibration: 0.9,
            extremization: Schedule { start: 0.8, end: 1.2 },
            machine_equivalents: MachineEquivalents::default(),
            include_machine: true,
            skill_features: SkillFeatures::default(),
        }
    }
}

impl AggregationConfig {
    /// Unweighted mean of the recency-kept forecasts, no transforms.
    pub fn plain_mean() -> Self {
        AggregationConfig {
            decay_rate: 0.0,
            skill_exponent: Schedule::constant(0.0),
            individual_recalibration: 1.0,
            extremization: Schedule::constant(1.0),
            ..Default::default()
        }
    }

    pub fn human_only(mut self) -> Self {
        self.include_machine = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.recency_fraction > 0.0 && self.recency_fraction <= 1.0) {
            return bad("recency_fraction must be in (0, 1]");
        }
        if !(self.decay_rate >= 0.0) {
            return bad("decay_rate must be >= 0");
        }
        if !(self.individual_recalibration > 0.0 && self.individual_recalibration <= 1.0) {
            return bad("individual_recalibration must be in (0, 1]");
        }
        if !(self.extremization.start > 0.0 && self.extremization.end > 0.0) {
            return bad("extremization exponents must be > 0");
        }
        if !(self.machine_equivalents.timeseries >= 0.0 && self.machine_equivalents.other >= 0.0) {
            return bad("machine equivalents must be >= 0");
        }
        if !(self.skill_exponent.start.is_finite() && self.skill_exponent.end.is_finite()) {
            return bad("skill exponent schedule must be finite");
        }
        Ok(())
    }

    pub fn machine_weight(&self, timeseries: bool) -> f64 {
        if timeseries {
            self.machine_equivalents.timeseries
        } else {
            self.machine_equivalents.other
        }
    }
}

/// A named aggregation configuration producing one forecast per open IFP per day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotConfig {
    pub name: String,
    #[serde(flatten)]
    pub aggregation: AggregationConfig,
}

/// Calendar span used to place a day within the season.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Season {
    pub first: Day,
    pub last: Day,
}

impl Season {
    pub fn of(log: &TournamentLog) -> Option<Season> {
        log.calendar().map(|(first, last)| Season { first, last })
    }

    /// Position of `day` in the season, clamped to [0, 1].
    pub fn fraction(&self, day: Day) -> f64 {
        let span = self.last.since(self.first);
        if span <= 0 {
            return 0.0;
        }
        (day.since(self.first) as f64 / span as f64).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SkillRecord {
    pub user_id: String,
    /// Mean over resolved IFPs of the user's mean standardized daily Brier.
    pub mean_z: f64,
    pub update_count: usize,
    /// Mean L1 distance between consecutive forecasts on the same IFP.
    pub mean_abs_step: f64,
    pub attempted: usize,
    #[serde(skip)]
    z_sum: f64,
    #[serde(skip)]
    step_sum: f64,
}

/// Skill records accumulated as IFPs resolve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SkillBook {
    records: BTreeMap<String, SkillRecord>,
}

impl SkillBook {
    pub fn get(&self, user: &str) -> Option<&SkillRecord> {
        self.records.get(user)
    }

    pub fn records(&self) -> impl Iterator<Item = &SkillRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Folds one resolved IFP into the book. Human forecasters are scored on
    /// the days they hold a standing forecast, standardized per IFP-day.
    pub fn record_ifp(&mut self, log: &TournamentLog, ifp: &Ifp) -> Result<()> {
        let forecasts: Vec<&Forecast> = log.forecasts_for(&ifp.id).collect();
        self.record_forecasts(ifp, &forecasts)
    }

    /// Same as [`SkillBook::record_ifp`] for an explicit forecast list in
    /// timestamp order.
    pub fn record_forecasts(&mut self, ifp: &Ifp, forecasts: &[&Forecast]) -> Result<()> {
        let outcome = ifp.resolved_option.ok_or_else(|| Error::Unresolved(ifp.id.clone()))?;
        let mut groups: BTreeMap<&Source, Vec<&Forecast>> = BTreeMap::new();
        for f in forecasts.iter().filter(|f| f.source.is_human()) {
            groups.entry(&f.source).or_default().push(f);
        }
        if groups.is_empty() {
            return Ok(());
        }
        // Dense user x day grid of carried-forward Briers, NaN before a
        // user's first forecast.
        let days = ifp.active_len();
        let users = groups.len();
        let mut grid = vec![f64::NAN; users * days];
        for (u, own) in groups.values().enumerate() {
            let row = &mut grid[u * days..(u + 1) * days];
            let mut next = 0;
            let mut current = f64::NAN;
            for (k, day) in ifp.active_days().enumerate() {
                let mut changed = None;
                while next < own.len() && own[next].timestamp.day <= day {
                    changed = Some(&own[next].probs);
                    next += 1;
                }
                if let Some(p) = changed {
                    current = brier_for(ifp, p, outcome)?;
                }
                row[k] = current;
            }
        }
        let mut z_sum = vec![0.0; users];
        let mut z_n = vec![0usize; users];
        let mut col = Vec::with_capacity(users);
        for k in 0..days {
            col.clear();
            col.extend((0..users).filter(|&u| !grid[u * days + k].is_nan()).map(|u| (u, grid[u * days + k])));
            let xs: Vec<f64> = col.iter().map(|(_, x)| *x).collect();
            let m = stats::mean(&xs).unwrap_or(0.0);
            let sd = stats::sample_sd(&xs).filter(|sd| *sd > 0.0);
            for &(u, x) in &col {
                z_sum[u] += sd.map_or(0.0, |sd| (x - m) / sd);
                z_n[u] += 1;
            }
        }
        for (u, (src, own)) in groups.iter().enumerate() {
            let rec = self.records.entry(src.id().to_string()).or_insert_with(|| SkillRecord {
                user_id: src.id().to_string(),
                ..Default::default()
            });
            rec.attempted += 1;
            rec.z_sum += if z_n[u] > 0 { z_sum[u] / z_n[u] as f64 } else { 0.0 };
            rec.mean_z = rec.z_sum / rec.attempted as f64;
            for w in own.windows(2) {
                let step: f64 = w[0].probs.iter().zip(&w[1].probs).map(|(a, b)| (a - b).abs()).sum();
                rec.step_sum += step;
                rec.update_count += 1;
            }
            if rec.update_count > 0 {
                rec.mean_abs_step = rec.step_sum / rec.update_count as f64;
            }
        }
        Ok(())
    }

    /// Book built from every IFP resolved on or before `day`.
    pub fn from_resolved(log: &TournamentLog, before_or_on: Day) -> Result<SkillBook> {
        let mut book = SkillBook::default();
        for ifp in log.ifps().filter(|i| i.resolved_option.is_some() && i.close_date <= before_or_on) {
            book.record_ifp(log, ifp)?;
        }
        Ok(book)
    }
}

/// Number of forecasts the recency filter keeps out of `n`.
pub fn recency_keep_count(n: usize, fraction: f64, floor: usize) -> usize {
    ((fraction * n as f64).ceil() as usize).max(floor.min(n)).min(n)
}

/// Keeps the `max(ceil(fraction * n), min(floor, n))` most recent forecasts.
/// Input order is irrelevant; output is newest first, ties by source.
pub fn recency_filter<'a>(standing: &[&'a Forecast], fraction: f64, floor: usize) -> Vec<&'a Forecast> {
    let keep = recency_keep_count(standing.len(), fraction, floor);
    let mut sorted = standing.to_vec();
    sorted.sort_by(|a, b| b.timestamp.cmp(&a.timestamp).then_with(|| a.source.cmp(&b.source)));
    sorted.truncate(keep);
    sorted
}

pub fn decay_weights(kept: &[&Forecast], day: Day, rate: f64) -> Vec<f64> {
    kept.iter()
        .map(|f| {
            if rate == 0.0 {
                1.0
            } else {
                (-rate * day.since(f.timestamp.day) as f64).exp()
            }
        })
        .collect()
}

/// Skill weight per user, renormalized to mean 1 across `users`.
pub fn skill_weights(book: &SkillBook, users: &[&str], gamma: f64, features: &SkillFeatures) -> Vec<f64> {
    if users.is_empty() {
        return Vec::new();
    }
    if gamma == 0.0 {
        return vec![1.0; users.len()];
    }
    let raw: Vec<f64> = users
        .iter()
        .map(|u| match book.get(u) {
            None => 1.0,
            Some(r) => {
                let per_ifp_updates = r.update_count as f64 / r.attempted.max(1) as f64;
                let z = r.mean_z - features.update_frequency * per_ifp_updates + features.update_step * r.mean_abs_step;
                (-z).exp().powf(gamma)
            }
        })
        .collect();
    let m = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.iter().map(|w| w / m).collect()
}

/// `p_i^a / sum_j p_j^a`; exponent 1 returns the input unchanged.
pub fn power_transform(probs: &[f64], a: f64) -> Vec<f64> {
    if a == 1.0 {
        return probs.to_vec();
    }
    let powered: Vec<f64> = probs.iter().map(|p| p.powf(a)).collect();
    let s: f64 = powered.iter().sum();
    powered.iter().map(|p| p / s).collect()
}

pub fn recalibrate_individual(probs: &[f64], a_ind: f64) -> Vec<f64> {
    power_transform(probs, a_ind)
}

pub fn extremize_aggregate(probs: &[f64], a: f64) -> Vec<f64> {
    power_transform(probs, a)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanAggregate {
    pub probs: Vec<f64>,
    /// Sum of the combined decay and skill weights of the kept forecasts.
    pub total_weight: f64,
    pub n_kept: usize,
}

/// Aggregates standing human forecasts on `ifp` as of `day`.
pub fn aggregate_standing(
    standing: &[&Forecast],
    day: Day,
    config: &AggregationConfig,
    skills: &SkillBook,
    season_t: f64,
) -> Option<HumanAggregate> {
    let kept = recency_filter(standing, config.recency_fraction, config.min_forecasts_floor);
    let recalibrated: Vec<Vec<f64>> =
        kept.iter().map(|f| recalibrate_individual(&f.probs, config.individual_recalibration)).collect();
    let refs: Vec<&[f64]> = recalibrated.iter().map(Vec::as_slice).collect();
    aggregate_kept(&kept, &refs, day, config, skills, season_t)
}

/// Pipeline after the recency filter: `kept` is newest first and
/// `recalibrated[i]` is `kept[i]` after individual recalibration.
pub(crate) fn aggregate_kept(
    kept: &[&Forecast],
    recalibrated: &[&[f64]],
    day: Day,
    config: &AggregationConfig,
    skills: &SkillBook,
    season_t: f64,
) -> Option<HumanAggregate> {
    if kept.is_empty() {
        return None;
    }
    let decay = decay_weights(kept, day, config.decay_rate);
    let users: Vec<&str> = kept.iter().map(|f| f.source.id()).collect();
    let skill = skill_weights(skills, &users, config.skill_exponent.at(season_t), &config.skill_features);
    let c = recalibrated[0].len();
    let mut acc = vec![0.0; c];
    let mut total = 0.0;
    for ((p, d), s) in recalibrated.iter().zip(&decay).zip(&skill) {
        let w = d * s;
        for (a, v) in acc.iter_mut().zip(p.iter()) {
            *a += w * v;
        }
        total += w;
    }
    if !(total > 0.0) {
        return None;
    }
    let mean: Vec<f64> = acc.iter().map(|a| a / total).collect();
    Some(HumanAggregate {
        probs: extremize_aggregate(&mean, config.extremization.at(season_t)),
        total_weight: total,
        n_kept: kept.len(),
    })
}

/// Human aggregate for `ifp` on `day` from the log's human forecasts.
pub fn human_aggregate(
    log: &TournamentLog,
    ifp: &Ifp,
    day: Day,
    config: &AggregationConfig,
    skills: &SkillBook,
    season: &Season,
) -> Result<Option<HumanAggregate>> {
    let latest = latest_per_source(log, &ifp.id, day)?;
    let standing: Vec<&Forecast> = latest.into_iter().filter(|(s, _)| s.is_human()).map(|(_, f)| f).collect();
    Ok(aggregate_standing(&standing, day, config, skills, season.fraction(day)))
}

/// Weighted blend of the human aggregate and the machine forecast, where the
/// machine counts as `k` average-weight forecasters.
pub fn combine_with_machine(
    human: Option<&HumanAggregate>,
    machine: Option<&[f64]>,
    timeseries: bool,
    config: &AggregationConfig,
) -> Result<Vec<f64>> {
    let machine = machine.filter(|_| config.include_machine);
    match (human, machine) {
        (None, None) => Err(Error::NothingToCombine),
        (Some(h), None) => Ok(h.probs.clone()),
        (None, Some(m)) => Ok(m.to_vec()),
        (Some(h), Some(m)) => {
            let k = config.machine_weight(timeseries);
            if k == 0.0 {
                return Ok(h.probs.clone());
            }
            let total = h.total_weight + k;
            Ok(h.probs
                .iter()
                .zip(m)
                .map(|(hp, mp)| (h.total_weight * hp + k * mp) / total)
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Fill, Timestamp};

    fn fc(user: &str, day: i32, probs: &[f64]) -> Forecast {
        Forecast {
            ifp_id: "q".into(),
            source: Source::human(user),
            probs: probs.to_vec(),
            timestamp: Timestamp::new(Day(day), 0),
        }
    }

    #[test]
    fn book_matches_standardized_scores() {
        use crate::domain::{HorizonKind, IfpKind};
        use crate::scoring::{score_daily_from, standardize, StandardizeLevel};
        let ifp = Ifp {
            id: "q".into(),
            title: String::new(),
            options: vec!["a".into(), "b".into(), "c".into()],
            kind: IfpKind::Ordinal,
            open_date: Day(0),
            close_date: Day(9),
            resolved_option: Some(1),
            series_ref: None,
            thresholds: None,
            horizon_kind: HorizonKind::ValueAtClose,
        };
        let fs = [
            fc("a", 0, &[0.2, 0.5, 0.3]),
            fc("b", 1, &[0.6, 0.2, 0.2]),
            fc("a", 3, &[0.1, 0.8, 0.1]),
            fc("c", 3, &[0.3, 0.3, 0.4]),
            fc("b", 6, &[0.3, 0.4, 0.3]),
            fc("d", 9, &[0.0, 1.0, 0.0]),
        ];
        let refs: Vec<&Forecast> = fs.iter().collect();
        let mut book = SkillBook::default();
        book.record_forecasts(&ifp, &refs).unwrap();
        let users = ["a", "b", "c", "d"];
        let mut daily = Vec::new();
        for u in users {
            let own: Vec<&Forecast> = refs.iter().copied().filter(|f| f.source.id() == u).collect();
            daily.extend(score_daily_from(&ifp, &Source::human(u), &own, Fill::None).unwrap());
        }
        let z = standardize(&daily, StandardizeLevel::IfpDay);
        for u in users {
            let zs: Vec<f64> = daily.iter().zip(&z).filter(|(d, _)| d.source.id() == u).map(|(_, z)| *z).collect();
            let r = book.get(u).unwrap();
            assert_eq!(r.mean_z.to_bits(), stats::mean(&zs).unwrap().to_bits(), "{u}");
        }
        assert_eq!(book.get("a").unwrap().update_count, 1);
        assert!((book.get("a").unwrap().mean_abs_step - 0.6).abs() < 1e-12);
    }

    #[test]
    fn recency_examples() {
        let fs: Vec<Forecast> = (0..10).map(|i| fc(&format!("u{i}"), i, &[0.5, 0.5])).collect();
        let refs: Vec<&Forecast> = fs.iter().collect();
        let kept = recency_filter(&refs, 0.4, 0);
        assert_eq!(kept.len(), 4);
        assert!(kept.iter().all(|f| f.timestamp.day.0 >= 6));
        assert_eq!(recency_filter(&refs[..3], 0.4, 5).len(), 3);
        assert!(recency_filter(&[], 0.4, 5).is_empty());
        assert_eq!(recency_filter(&refs, 0.4, 5).len(), 5);
    }

    #[test]
    fn decay_examples() {
        let fs = [fc("a", 10, &[0.5, 0.5]), fc("b", 7, &[0.5, 0.5]), fc("c", 0, &[0.5, 0.5])];
        let refs: Vec<&Forecast> = fs.iter().collect();
        assert_eq!(decay_weights(&refs, Day(10), 0.0), vec![1.0; 3]);
        let w = decay_weights(&refs, Day(10), 0.1);
        // exp(0), exp(-0.3), exp(-1.0)
        for (a, b) in w.iter().zip([1.0, 0.740818, 0.367879]) {
            assert!((a - b).abs() < 1e-6);
        }
        let half = decay_weights(&refs[1..2], Day(14), std::f64::consts::LN_2 / 7.0);
        assert!((half[0] - 0.5).abs() < 1e-12);
    }

    fn book_with(zs: &[(&str, f64)]) -> SkillBook {
        let mut b = SkillBook::default();
        for (u, z) in zs {
            b.records.insert(
                u.to_string(),
                SkillRecord { user_id: u.to_string(), mean_z: *z, attempted: 1, ..Default::default() },
            );
        }
        b
    }

    #[test]
    fn skill_weight_examples() {
        let none = SkillBook::default();
        assert_eq!(skill_weights(&none, &["a", "b"], 1.5, &SkillFeatures::default()), vec![1.0, 1.0]);
        let book = book_with(&[("a", -1.0), ("b", 0.0), ("c", 1.0)]);
        assert_eq!(skill_weights(&book, &["a", "b", "c"], 0.0, &SkillFeatures::default()), vec![1.0; 3]);
        let w = skill_weights(&book, &["a", "b", "c"], 1.0, &SkillFeatures::default());
        let e = std::f64::consts::E;
        let m = (e + 1.0 + 1.0 / e) / 3.0;
        for (a, b) in w.iter().zip([e / m, 1.0 / m, 1.0 / e / m]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((w.iter().sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_transform_examples() {
        assert_eq!(recalibrate_individual(&[0.8, 0.2], 1.0), vec![0.8, 0.2]);
        assert_eq!(recalibrate_individual(&[1.0, 0.0], 0.5), vec![1.0, 0.0]);
        let r = recalibrate_individual(&[0.8, 0.2], 0.5);
        assert!((r[0] - 2.0 / 3.0).abs() < 1e-12 && (r[1] - 1.0 / 3.0).abs() < 1e-12);
        let x = extremize_aggregate(&[0.8, 0.2], 2.0);
        assert!((x[0] - 0.64 / 0.68).abs() < 1e-12 && (x[1] - 0.04 / 0.68).abs() < 1e-12);
        let u = extremize_aggregate(&[0.25; 4], 1.7);
        assert!(u.iter().all(|p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn weighted_mean_example() {
        let fs = [fc("a", 1, &[0.9, 0.1]), fc("b", 1, &[0.5, 0.5])];
        let refs: Vec<&Forecast> = fs.iter().collect();
        // Skill weights (2, 1) before renormalization: z_a - z_b = -ln 2.
        let book = book_with(&[("a", -std::f64::consts::LN_2), ("b", 0.0)]);
        let cfg = AggregationConfig {
            decay_rate: 0.0,
            skill_exponent: Schedule::constant(1.0),
            individual_recalibration: 1.0,
            extremization: Schedule::constant(1.0),
            ..Default::default()
        };
        let agg = aggregate_standing(&refs, Day(1), &cfg, &book, 0.5).unwrap();
        assert!((agg.probs[0] - 0.766_666_666_666_7).abs() < 1e-9);
        assert!((agg.probs[1] - 0.233_333_333_333_3).abs() < 1e-9);
        assert_eq!(agg.n_kept, 2);
    }

    #[test]
    fn single_forecaster_gets_recalibrated_forecast() {
        let fs = [fc("a", 1, &[0.8, 0.2])];
        let refs: Vec<&Forecast> = fs.iter().collect();
        let cfg = AggregationConfig { extremization: Schedule::constant(1.0), ..Default::default() };
        let agg = aggregate_standing(&refs, Day(3), &cfg, &SkillBook::default(), 0.0).unwrap();
        let expected = recalibrate_individual(&[0.8, 0.2], cfg.individual_recalibration);
        for (a, b) in agg.probs.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(aggregate_standing(&[], Day(3), &cfg, &SkillBook::default(), 0.0).is_none());
    }

    #[test]
    fn combine_examples() {
        let cfg = AggregationConfig::default();
        let machine = [0.2, 0.8];
        assert_eq!(combine_with_machine(None, Some(&machine), true, &cfg).unwrap(), vec![0.2, 0.8]);
        let human = HumanAggregate { probs: vec![0.6, 0.4], total_weight: 8.0, n_kept: 8 };
        assert_eq!(combine_with_machine(Some(&human), None, true, &cfg).unwrap(), vec![0.6, 0.4]);
        let mid = combine_with_machine(Some(&human), Some(&machine), true, &cfg).unwrap();
        assert!((mid[0] - 0.4).abs() < 1e-12 && (mid[1] - 0.6).abs() < 1e-12);
        assert!(matches!(combine_with_machine(None, None, true, &cfg), Err(Error::NothingToCombine)));
        let human_only = cfg.clone().human_only();
        assert_eq!(combine_with_machine(Some(&human), Some(&machine), true, &human_only).unwrap(), vec![0.6, 0.4]);
    }

    #[test]
    fn season_fraction_clamps() {
        let s = Season { first: Day(10), last: Day(20) };
        assert_eq!(s.fraction(Day(5)), 0.0);
        assert_eq!(s.fraction(Day(15)), 0.5);
        assert_eq!(s.fraction(Day(30)), 1.0);
    }

    #[test]
    fn config_json_defaults() {
        let c: AggregationConfig = serde_json::from_str(r#"{"recency_fraction": 0.5}"#).unwrap();
        assert_eq!(c.recency_fraction, 0.5);
        assert_eq!(c.machine_equivalents.timeseries, 8.0);
        assert!(AggregationConfig { recency_fraction: 0.0, ..Default::default() }.validate().is_err());
        let slot: SlotConfig = serde_json::from_str(r#"{"name": "best", "decay_rate": 0.0}"#).unwrap();
        assert_eq!(slot.name, "best");
        assert_eq!(slot.aggregation.decay_rate, 0.0);
    }

    use proptest::prelude::*;

    fn prob_vec(c: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.001f64..1.0, c).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn power_transform_preserves_order(p in (2usize..=5).prop_flat_map(prob_vec), a in 0.1f64..4.0) {
            let q = power_transform(&p, a);
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for i in 0..p.len() {
                for j in 0..p.len() {
                    if p[i] < p[j] {
                        prop_assert!(q[i] <= q[j]);
                    }
                }
            }
        }

        #[test]
        fn combine_moves_toward_machine(h in prob_vec(3), m in prob_vec(3), w in 0.5f64..20.0) {
            let cfg = AggregationConfig::default();
            let human = HumanAggregate { probs: h.clone(), total_weight: w, n_kept: 3 };
            let mut prev = f64::INFINITY;
            for k in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 1e6] {
                let mut c = cfg.clone();
                c.machine_equivalents.timeseries = k;
                let out = combine_with_machine(Some(&human), Some(&m), true, &c).unwrap();
                let tv: f64 = out.iter().zip(&m).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
                prop_assert!(tv <= prev + 1e-15);
                prev = tv;
            }
        }
    }
}
