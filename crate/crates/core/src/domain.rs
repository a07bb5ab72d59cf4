//! Domain types shared by every other module: IFPs, forecasts, the
//! tournament log, and the carry-forward mechanics that turn a sparse
//! stream of submissions into one standing forecast per source per day.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on input probability sums; deviations up to this are renormalized.
pub const INPUT_SUM_TOLERANCE: f64 = 1e-6;
/// Tolerance on internally produced probability vectors.
pub const INTERNAL_SUM_TOLERANCE: f64 = 1e-9;

pub const MIN_OPTIONS: usize = 2;
pub const MAX_OPTIONS: usize = 5;

/// Calendar day, counted from 1970-01-01.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Day(pub i32);

impl Day {
    fn epoch() -> NaiveDate {
        NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()
    }

    pub fn from_date(date: NaiveDate) -> Self {
        Day((date - Self::epoch()).num_days() as i32)
    }

    pub fn to_date(self) -> NaiveDate {
        if self.0 >= 0 {
            Self::epoch() + Days::new(self.0 as u64)
        } else {
            Self::epoch() - Days::new(self.0.unsigned_abs() as u64)
        }
    }

    pub fn offset(self, days: i32) -> Self {
        Day(self.0 + days)
    }

    /// Signed number of days from `earlier` to `self`.
    pub fn since(self, earlier: Day) -> i32 {
        self.0 - earlier.0
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_date().format("%Y-%m-%d"))
    }
}

impl FromStr for Day {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .map(Day::from_date)
            .map_err(|e| Error::Import(format!("bad date {s:?}: {e}")))
    }
}

/// Day plus an intra-day ordinal; later ordinals win ties within a day.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp {
    pub day: Day,
    pub ordinal: u32,
}

impl Timestamp {
    pub fn new(day: Day, ordinal: u32) -> Self {
        Timestamp { day, ordinal }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IfpKind {
    Binary,
    Ordinal,
    Nominal,
}

impl fmt::Display for IfpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IfpKind::Binary => "binary",
            IfpKind::Ordinal => "ordinal",
            IfpKind::Nominal => "nominal",
        })
    }
}

impl FromStr for IfpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "binary" => Ok(IfpKind::Binary),
            "ordinal" => Ok(IfpKind::Ordinal),
            "nominal" => Ok(IfpKind::Nominal),
            other => Err(Error::Import(format!("unknown IFP kind {other:?}"))),
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonKind {
    #[default]
    ValueAtClose,
    SumOverWindow,
}

impl fmt::Display for HorizonKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HorizonKind::ValueAtClose => "value_at_close",
            HorizonKind::SumOverWindow => "sum_over_window",
        })
    }
}

impl FromStr for HorizonKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "" | "value_at_close" => Ok(HorizonKind::ValueAtClose),
            "sum_over_window" => Ok(HorizonKind::SumOverWindow),
            other => Err(Error::Import(format!("unknown horizon kind {other:?}"))),
        }
    }
}

/// A forecasting question.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ifp {
    pub id: String,
    pub title: String,
    pub options: Vec<String>,
    pub kind: IfpKind,
    pub open_date: Day,
    pub close_date: Day,
    pub resolved_option: Option<usize>,
    pub series_ref: Option<String>,
    pub thresholds: Option<Vec<f64>>,
    pub horizon_kind: HorizonKind,
}

impl Ifp {
    pub fn n_options(&self) -> usize {
        self.options.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidIfp { id: self.id.clone(), reason };
        let c = self.options.len();
        if !(MIN_OPTIONS..=MAX_OPTIONS).contains(&c) {
            return Err(bad(format!("{c} options, need 2..=5")));
        }
        if self.open_date > self.close_date {
            return Err(bad("open_date after close_date".into()));
        }
        if (self.kind == IfpKind::Binary) != (c == 2) {
            return Err(bad(format!("kind {} with {c} options", self.kind)));
        }
        if let Some(t) = &self.thresholds {
            // Binary questions are the two-option ordinal case, so they may carry a cut point too.
            if self.kind == IfpKind::Nominal {
                return Err(bad("thresholds on a nominal IFP".into()));
            }
            if t.len() + 1 != c {
                return Err(bad(format!("{} thresholds for {c} options", t.len())));
            }
            if t.iter().any(|x| !x.is_finite()) || t.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad("thresholds must be finite and strictly increasing".into()));
            }
        }
        if let Some(r) = self.resolved_option {
            if r >= c {
                return Err(bad(format!("resolved option {r} out of range")));
            }
        }
        Ok(())
    }

    pub fn is_active(&self, day: Day) -> bool {
        self.open_date <= day && day <= self.close_date
    }

    /// Number of active days, both endpoints included.
    pub fn active_len(&self) -> usize {
        (self.close_date.since(self.open_date) + 1) as usize
    }

    pub fn active_days(&self) -> impl Iterator<Item = Day> {
        (self.open_date.0..=self.close_date.0).map(Day)
    }

    pub fn is_timeseries(&self) -> bool {
        self.series_ref.is_some()
    }

    /// Uses the ordered (cumulative split) Brier form.
    pub fn is_ordered(&self) -> bool {
        self.kind == IfpKind::Ordinal && self.n_options() >= 3
    }
}

/// Who produced a forecast.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Human(String),
    Machine(String),
    Slot(String),
}

impl Source {
    pub fn human(id: impl Into<String>) -> Self {
        Source::Human(id.into())
    }

    pub fn machine(id: impl Into<String>) -> Self {
        Source::Machine(id.into())
    }

    pub fn slot(id: impl Into<String>) -> Self {
        Source::Slot(id.into())
    }

    pub fn id(&self) -> &str {
        match self {
            Source::Human(s) | Source::Machine(s) | Source::Slot(s) => s,
        }
    }

    pub fn is_human(&self) -> bool {
        matches!(self, Source::Human(_))
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Human(s) => write!(f, "human:{s}"),
            Source::Machine(s) => write!(f, "machine:{s}"),
            Source::Slot(s) => write!(f, "slot:{s}"),
        }
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, id) = s
            .split_once(':')
            .ok_or_else(|| Error::Import(format!("source {s:?} lacks a kind prefix")))?;
        if id.is_empty() {
            return Err(Error::Import(format!("source {s:?} has an empty id")));
        }
        match kind {
            "human" => Ok(Source::human(id)),
            "machine" => Ok(Source::machine(id)),
            "slot" => Ok(Source::slot(id)),
            _ => Err(Error::Import(format!("unknown source kind {kind:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub ifp_id: String,
    pub source: Source,
    pub probs: Vec<f64>,
    pub timestamp: Timestamp,
}

/// Checks a submitted probability vector and renormalizes small sum errors.
pub fn validate_forecast(probs: &[f64], c: usize) -> Result<Vec<f64>> {
    check_option_count(c)?;
    if probs.len() != c {
        return Err(Error::WrongLength { expected: c, got: probs.len() });
    }
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite(index));
        }
        if value < 0.0 {
            return Err(Error::NegativeProbability { index, value });
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > INPUT_SUM_TOLERANCE {
        return Err(Error::SumDeviation { sum });
    }
    Ok(probs.iter().map(|p| p / sum).collect())
}

pub fn uniform_forecast(c: usize) -> Result<Vec<f64>> {
    check_option_count(c)?;
    Ok(vec![1.0 / c as f64; c])
}

fn check_option_count(c: usize) -> Result<()> {
    if (MIN_OPTIONS..=MAX_OPTIONS).contains(&c) {
        Ok(())
    } else {
        Err(Error::OptionCount(c))
    }
}

/// True when `probs` is a probability vector within the internal tolerance.
pub fn is_probability_vector(probs: &[f64]) -> bool {
    probs.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p))
        && (probs.iter().sum::<f64>() - 1.0).abs() <= INTERNAL_SUM_TOLERANCE
}

/// Immutable record of a tournament: questions, forecasts in timestamp
/// order, and optional condition tags for human forecasters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TournamentLog {
    ifps: BTreeMap<String, Ifp>,
    forecasts: Vec<Forecast>,
    by_ifp: BTreeMap<String, Vec<usize>>,
    conditions: BTreeMap<String, String>,
}

impl TournamentLog {
    pub fn builder() -> LogBuilder {
        LogBuilder::default()
    }

    pub fn ifps(&self) -> impl Iterator<Item = &Ifp> {
        self.ifps.values()
    }

    pub fn ifp(&self, id: &str) -> Result<&Ifp> {
        self.ifps.get(id).ok_or_else(|| Error::UnknownIfp(id.to_string()))
    }

    pub fn n_ifps(&self) -> usize {
        self.ifps.len()
    }

    pub fn forecasts(&self) -> &[Forecast] {
        &self.forecasts
    }

    /// Forecasts on one IFP in timestamp order.
    pub fn forecasts_for<'a>(&'a self, ifp_id: &str) -> impl Iterator<Item = &'a Forecast> + 'a {
        self.by_ifp
            .get(ifp_id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.forecasts[i])
    }

    /// Forecasts on one IFP grouped by source, each group in timestamp order.
    pub fn by_source<'a>(&'a self, ifp_id: &str) -> BTreeMap<&'a Source, Vec<&'a Forecast>> {
        let mut out: BTreeMap<&Source, Vec<&Forecast>> = BTreeMap::new();
        for f in self.forecasts_for(ifp_id) {
            out.entry(&f.source).or_default().push(f);
        }
        out
    }

    pub fn sources(&self) -> Vec<&Source> {
        let mut s: Vec<&Source> = self.forecasts.iter().map(|f| &f.source).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn human_ids(&self) -> Vec<&str> {
        let mut s: Vec<&str> = self
            .forecasts
            .iter()
            .filter_map(|f| match &f.source {
                Source::Human(u) => Some(u.as_str()),
                _ => None,
            })
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn conditions(&self) -> &BTreeMap<String, String> {
        &self.conditions
    }

    pub fn condition_of(&self, user: &str) -> Option<&str> {
        self.conditions.get(user).map(String::as_str)
    }

    /// First and last active day across all IFPs.
    pub fn calendar(&self) -> Option<(Day, Day)> {
        let first = self.ifps.values().map(|i| i.open_date).min()?;
        let last = self.ifps.values().map(|i| i.close_date).max()?;
        Some((first, last))
    }

    /// Copy of this log keeping only forecasts for which `keep` returns true.
    pub fn filtered(&self, mut keep: impl FnMut(&Forecast) -> bool) -> TournamentLog {
        let forecasts: Vec<Forecast> = self.forecasts.iter().filter(|f| keep(f)).cloned().collect();
        let by_ifp = index_by_ifp(&forecasts);
        TournamentLog {
            ifps: self.ifps.clone(),
            forecasts,
            by_ifp,
            conditions: self.conditions.clone(),
        }
    }

    /// Builder seeded with this log's contents, for appending more forecasts.
    pub fn to_builder(&self) -> LogBuilder {
        LogBuilder {
            ifps: self.ifps.clone(),
            forecasts: self.forecasts.clone(),
            conditions: self.conditions.clone(),
        }
    }
}

fn index_by_ifp(forecasts: &[Forecast]) -> BTreeMap<String, Vec<usize>> {
    let mut by_ifp: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, f) in forecasts.iter().enumerate() {
        by_ifp.entry(f.ifp_id.clone()).or_default().push(i);
    }
    by_ifp
}

#[derive(Clone, Debug, Default)]
pub struct LogBuilder {
    ifps: BTreeMap<String, Ifp>,
    forecasts: Vec<Forecast>,
    conditions: BTreeMap<String, String>,
}

impl LogBuilder {
    pub fn ifp(&mut self, ifp: Ifp) -> Result<&mut Self> {
        ifp.validate()?;
        self.ifps.insert(ifp.id.clone(), ifp);
        Ok(self)
    }

    pub fn condition(&mut self, user: impl Into<String>, tag: impl Into<String>) -> &mut Self {
        self.conditions.insert(user.into(), tag.into());
        self
    }

    /// Validates and appends a forecast; probabilities are renormalized.
    pub fn forecast(&mut self, mut forecast: Forecast) -> Result<&mut Self> {
        let ifp = self
            .ifps
            .get(&forecast.ifp_id)
            .ok_or_else(|| Error::UnknownIfp(forecast.ifp_id.clone()))?;
        forecast.probs = validate_forecast(&forecast.probs, ifp.n_options())?;
        if !ifp.is_active(forecast.timestamp.day) {
            return Err(Error::OutsideWindow {
                ifp: ifp.id.clone(),
                day: forecast.timestamp.day.to_string(),
            });
        }
        self.forecasts.push(forecast);
        Ok(self)
    }

    /// Appends a forecast whose probabilities already form a valid vector,
    /// keeping them bit-for-bit.
    pub fn forecast_verbatim(&mut self, forecast: Forecast) -> Result<&mut Self> {
        let ifp = self
            .ifps
            .get(&forecast.ifp_id)
            .ok_or_else(|| Error::UnknownIfp(forecast.ifp_id.clone()))?;
        if forecast.probs.len() != ifp.n_options() {
            return Err(Error::WrongLength { expected: ifp.n_options(), got: forecast.probs.len() });
        }
        if !is_probability_vector(&forecast.probs) {
            return Err(Error::SumDeviation { sum: forecast.probs.iter().sum() });
        }
        if !ifp.is_active(forecast.timestamp.day) {
            return Err(Error::OutsideWindow {
                ifp: ifp.id.clone(),
                day: forecast.timestamp.day.to_string(),
            });
        }
        self.forecasts.push(forecast);
        Ok(self)
    }

    pub fn resolve(&mut self, ifp_id: &str, option: usize) -> Result<&mut Self> {
        let ifp = self
            .ifps
            .get_mut(ifp_id)
            .ok_or_else(|| Error::UnknownIfp(ifp_id.to_string()))?;
        if option >= ifp.n_options() {
            return Err(Error::OutcomeRange { outcome: option, options: ifp.n_options() });
        }
        ifp.resolved_option = Some(option);
        Ok(self)
    }

    /// Sorts forecasts by timestamp; equal timestamps keep insertion order.
    pub fn build(mut self) -> TournamentLog {
        self.forecasts.sort_by_key(|f| f.timestamp);
        let by_ifp = index_by_ifp(&self.forecasts);
        TournamentLog {
            ifps: self.ifps,
            forecasts: self.forecasts,
            by_ifp,
            conditions: self.conditions,
        }
    }
}

/// Most recent forecast per source on `ifp_id` with timestamp on or before `day`.
pub fn latest_per_source<'a>(
    log: &'a TournamentLog,
    ifp_id: &str,
    day: Day,
) -> Result<BTreeMap<&'a Source, &'a Forecast>> {
    log.ifp(ifp_id)?;
    let mut out = BTreeMap::new();
    for f in log.forecasts_for(ifp_id) {
        if f.timestamp.day > day {
            break;
        }
        out.insert(&f.source, f);
    }
    Ok(out)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fill {
    Uniform,
    None,
}

/// Standing forecast of `source` on `day`, falling back to `fill` before its first forecast.
pub fn active_forecast_on_day(
    log: &TournamentLog,
    source: &Source,
    ifp: &Ifp,
    day: Day,
    fill: Fill,
) -> Option<Vec<f64>> {
    let standing = log
        .forecasts_for(&ifp.id)
        .take_while(|f| f.timestamp.day <= day)
        .filter(|f| &f.source == source)
        .last();
    match (standing, fill) {
        (Some(f), _) => Some(f.probs.clone()),
        (None, Fill::Uniform) => Some(vec![1.0 / ifp.n_options() as f64; ifp.n_options()]),
        (None, Fill::None) => None,
    }
}

/// Carries a single source's forecasts forward across every active day of
/// `ifp`. `forecasts` must be in timestamp order. Entry `i` is the standing
/// forecast on `open_date + i`, or `None` before the first submission.
pub fn standing_by_day<'a>(ifp: &Ifp, forecasts: &[&'a Forecast]) -> Vec<Option<&'a [f64]>> {
    let mut out = Vec::with_capacity(ifp.active_len());
    let mut next = 0;
    let mut current: Option<&[f64]> = None;
    for day in ifp.active_days() {
        while next < forecasts.len() && forecasts[next].timestamp.day <= day {
            current = Some(&forecasts[next].probs);
            next += 1;
        }
        out.push(current);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn binary_ifp(id: &str, open: i32, close: i32) -> Ifp {
        Ifp {
            id: id.into(),
            title: String::new(),
            options: vec!["yes".into(), "no".into()],
            kind: IfpKind::Binary,
            open_date: Day(open),
            close_date: Day(close),
            resolved_option: None,
            series_ref: None,
            thresholds: None,
            horizon_kind: HorizonKind::ValueAtClose,
        }
    }

    fn fc(ifp: &str, user: &str, day: i32, ord: u32, probs: &[f64]) -> Forecast {
        Forecast {
            ifp_id: ifp.into(),
            source: Source::human(user),
            probs: probs.to_vec(),
            timestamp: Timestamp::new(Day(day), ord),
        }
    }

    #[test]
    fn validate_examples() {
        assert_eq!(validate_forecast(&[0.5, 0.5], 2).unwrap(), vec![0.5, 0.5]);
        assert!(matches!(
            validate_forecast(&[0.3, 0.3, 0.3], 3),
            Err(Error::SumDeviation { .. })
        ));
        let v = validate_forecast(&[0.2500003, 0.7499997], 2).unwrap();
        assert!((v[0] - 0.2500003).abs() < 1e-12);
        assert!(matches!(validate_forecast(&[0.5, 0.5], 3), Err(Error::WrongLength { .. })));
        assert!(matches!(
            validate_forecast(&[1.2, -0.2], 2),
            Err(Error::NegativeProbability { index: 1, .. })
        ));
        assert!(matches!(validate_forecast(&[1.0], 1), Err(Error::OptionCount(1))));
    }

    #[test]
    fn renormalizes_within_tolerance() {
        let v = validate_forecast(&[0.5000004, 0.5], 2).unwrap();
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_examples() {
        assert_eq!(uniform_forecast(2).unwrap(), vec![0.5, 0.5]);
        assert_eq!(uniform_forecast(4).unwrap(), vec![0.25; 4]);
        assert_eq!(uniform_forecast(5).unwrap(), vec![0.2; 5]);
        assert!(uniform_forecast(6).is_err());
        assert!(uniform_forecast(1).is_err());
    }

    #[test]
    fn ifp_invariants() {
        let mut ifp = binary_ifp("a", 0, 9);
        assert!(ifp.validate().is_ok());
        ifp.kind = IfpKind::Nominal;
        assert!(ifp.validate().is_err());
        let mut ord = binary_ifp("b", 0, 9);
        ord.options = vec!["lo".into(), "mid".into(), "hi".into()];
        ord.kind = IfpKind::Ordinal;
        ord.thresholds = Some(vec![2.0, 1.0]);
        assert!(ord.validate().is_err());
        ord.thresholds = Some(vec![1.0, 2.0]);
        assert!(ord.validate().is_ok());
        ord.resolved_option = Some(3);
        assert!(ord.validate().is_err());
        let mut rev = binary_ifp("c", 5, 4);
        assert!(rev.validate().is_err());
        rev.close_date = Day(5);
        assert!(rev.validate().is_ok());
        assert_eq!(rev.active_len(), 1);
    }

    fn small_log() -> TournamentLog {
        let mut b = TournamentLog::builder();
        b.ifp(binary_ifp("q", 1, 10)).unwrap();
        b.forecast(fc("q", "u", 4, 0, &[0.4, 0.6])).unwrap();
        b.forecast(fc("q", "u", 2, 0, &[0.2, 0.8])).unwrap();
        b.forecast(fc("q", "v", 3, 0, &[0.9, 0.1])).unwrap();
        b.forecast(fc("q", "v", 3, 1, &[0.7, 0.3])).unwrap();
        b.build()
    }

    #[test]
    fn latest_per_source_examples() {
        let log = small_log();
        let empty = latest_per_source(&log, "q", Day(1)).unwrap();
        assert!(empty.is_empty());
        let day5 = latest_per_source(&log, "q", Day(5)).unwrap();
        assert_eq!(day5[&Source::human("u")].probs, vec![0.4, 0.6]);
        assert_eq!(day5[&Source::human("v")].probs, vec![0.7, 0.3]);
        let day3 = latest_per_source(&log, "q", Day(3)).unwrap();
        assert_eq!(day3[&Source::human("u")].timestamp.day, Day(2));
        assert!(matches!(latest_per_source(&log, "zz", Day(3)), Err(Error::UnknownIfp(_))));
    }

    #[test]
    fn same_day_ordinal_last_write_wins() {
        let mut b = TournamentLog::builder();
        b.ifp(binary_ifp("q", 1, 10)).unwrap();
        b.forecast(fc("q", "u", 3, 5, &[0.1, 0.9])).unwrap();
        b.forecast(fc("q", "u", 3, 2, &[0.6, 0.4])).unwrap();
        let log = b.build();
        let m = latest_per_source(&log, "q", Day(3)).unwrap();
        assert_eq!(m[&Source::human("u")].probs, vec![0.1, 0.9]);
    }

    #[test]
    fn active_forecast_fill() {
        let log = small_log();
        let ifp = log.ifp("q").unwrap();
        let never = Source::human("w");
        assert_eq!(active_forecast_on_day(&log, &never, ifp, Day(5), Fill::Uniform), Some(vec![0.5, 0.5]));
        assert_eq!(active_forecast_on_day(&log, &never, ifp, Day(5), Fill::None), None);
        let u = Source::human("u");
        assert_eq!(active_forecast_on_day(&log, &u, ifp, Day(10), Fill::None), Some(vec![0.4, 0.6]));
    }

    #[test]
    fn three_option_uniform_fill() {
        let mut ifp = binary_ifp("t", 0, 3);
        ifp.options.push("maybe".into());
        ifp.kind = IfpKind::Nominal;
        let mut b = TournamentLog::builder();
        b.ifp(ifp.clone()).unwrap();
        let log = b.build();
        let v = active_forecast_on_day(&log, &Source::human("x"), &ifp, Day(1), Fill::Uniform).unwrap();
        assert_eq!(v, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn rejects_out_of_window() {
        let mut b = TournamentLog::builder();
        b.ifp(binary_ifp("q", 1, 10)).unwrap();
        assert!(matches!(
            b.forecast(fc("q", "u", 11, 0, &[0.5, 0.5])),
            Err(Error::OutsideWindow { .. })
        ));
        assert!(matches!(b.forecast(fc("r", "u", 2, 0, &[0.5, 0.5])), Err(Error::UnknownIfp(_))));
    }

    #[test]
    fn standing_by_day_carries_forward() {
        let log = small_log();
        let ifp = log.ifp("q").unwrap();
        let groups = log.by_source("q");
        let u = &groups[&Source::human("u")];
        let days = standing_by_day(ifp, u);
        assert_eq!(days.len(), 10);
        assert!(days[0].is_none());
        assert_eq!(days[1], Some(&[0.2, 0.8][..]));
        assert_eq!(days[2], Some(&[0.2, 0.8][..]));
        assert_eq!(days[9], Some(&[0.4, 0.6][..]));
    }

    #[test]
    fn day_round_trip() {
        let d: Day = "2018-06-01".parse().unwrap();
        assert_eq!(d.to_string(), "2018-06-01");
        assert_eq!(Day(-1).to_string(), "1969-12-31");
        let s: Source = "machine:phe2".parse().unwrap();
        assert_eq!(s, Source::machine("phe2"));
        assert_eq!(s.to_string(), "machine:phe2");
    }
}
