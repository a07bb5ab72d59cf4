//! Forecast-budget policies: question ordering, exclusion of weak
//! forecasters after each resolution batch, and consensus capping.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate_standing, combine_with_machine, Season, SkillBook, SlotConfig};
use crate::domain::{Day, Forecast, Ifp, Source, TournamentLog};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::replay::replay_slot;

/// When an IFP's aggregate counts as settled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Consensus {
    /// Minimum top-option probability.
    pub threshold: f64,
    /// Consecutive days the aggregate must stay above the threshold.
    pub window: usize,
    /// Largest allowed day-to-day change of any option probability.
    pub max_drift: f64,
    /// Distinct human forecasters that must have contributed.
    pub min_forecasters: usize,
}

impl Default for Consensus {
    fn default() -> Self {
        Consensus { threshold: 0.85, window: 5, max_drift: 0.05, min_forecasters: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PolicyKind {
    All,
    Random { p_keep: f64 },
    GreedyIfp { exclude_frac: f64 },
    GreedyIfpPp { exclude_frac: f64, cap: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationPolicy {
    pub name: String,
    #[serde(flatten)]
    pub kind: PolicyKind,
    #[serde(default)]
    pub consensus: Consensus,
}

impl AllocationPolicy {
    pub fn new(name: impl Into<String>, kind: PolicyKind) -> Self {
        AllocationPolicy { name: name.into(), kind, consensus: Consensus::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("policy {}: {m}", self.name)));
        let frac_ok = |f: f64| f > 0.0 && f < 1.0;
        match self.kind {
            PolicyKind::All => {}
            PolicyKind::Random { p_keep } => {
                if !(p_keep > 0.0 && p_keep <= 1.0) {
                    return bad(format!("p_keep {p_keep} outside (0, 1]"));
                }
            }
            PolicyKind::GreedyIfp { exclude_frac } => {
                if !frac_ok(exclude_frac) {
                    return bad(format!("exclude_frac {exclude_frac} outside (0, 1)"));
                }
            }
            PolicyKind::GreedyIfpPp { exclude_frac, cap } => {
                if !frac_ok(exclude_frac) {
                    return bad(format!("exclude_frac {exclude_frac} outside (0, 1)"));
                }
                if self.consensus.min_forecasters < 1 || cap < self.consensus.min_forecasters {
                    return bad(format!("need cap >= min_forecasters >= 1, got cap {cap}"));
                }
            }
        }
        let c = &self.consensus;
        if !(c.threshold > 0.0 && c.threshold <= 1.0) || c.window == 0 || !(c.max_drift >= 0.0) {
            return bad("invalid consensus parameters".into());
        }
        Ok(())
    }

    fn exclude_frac(&self) -> Option<f64> {
        match self.kind {
            PolicyKind::GreedyIfp { exclude_frac } | PolicyKind::GreedyIfpPp { exclude_frac, .. } => Some(exclude_frac),
            _ => None,
        }
    }

    fn cap(&self) -> Option<usize> {
        match self.kind {
            PolicyKind::GreedyIfpPp { cap, .. } => Some(cap),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub policy: String,
    pub seed: u64,
    /// Mean over resolved IFPs of the slot's mean daily Brier.
    pub brier: f64,
    /// Kept human forecasts as a percentage of all human forecasts.
    pub budget: f64,
    pub kept: usize,
    pub total: usize,
    pub excluded_users: usize,
}

#[derive(Clone, Debug)]
pub struct Allocation {
    pub log: TournamentLog,
    pub report: BudgetReport,
    /// Excluded users and the batch day after which they were dropped.
    pub excluded: BTreeMap<String, Day>,
}

/// Orders the IFPs active on `day` by close date, then by ascending
/// forecast count, then by id.
pub fn swift_order<'a>(ifps: &[&'a Ifp], day: Day, popularity: &BTreeMap<String, usize>) -> Vec<&'a Ifp> {
    let mut out: Vec<&Ifp> = ifps.iter().copied().filter(|i| i.is_active(day)).collect();
    out.sort_by(|a, b| {
        let pa = popularity.get(&a.id).copied().unwrap_or(0);
        let pb = popularity.get(&b.id).copied().unwrap_or(0);
        a.close_date.cmp(&b.close_date).then(pa.cmp(&pb)).then_with(|| a.id.cmp(&b.id))
    });
    out
}

/// True when the last `window` daily aggregates all put at least
/// `threshold` on their top option, no probability moved by more than
/// `max_drift` between consecutive days, and enough forecasters took part.
pub fn consensus_reached(history: &[Option<Vec<f64>>], distinct_forecasters: usize, c: &Consensus) -> bool {
    if distinct_forecasters < c.min_forecasters || history.len() < c.window {
        return false;
    }
    let tail = &history[history.len() - c.window..];
    let mut prev: Option<&[f64]> = None;
    for day in tail {
        let Some(p) = day else { return false };
        if p.iter().copied().fold(f64::NEG_INFINITY, f64::max) < c.threshold {
            return false;
        }
        if let Some(q) = prev {
            if p.iter().zip(q).any(|(a, b)| (a - b).abs() > c.max_drift) {
                return false;
            }
        }
        prev = Some(p);
    }
    true
}

struct IfpState<'a> {
    humans: BTreeMap<&'a Source, &'a Forecast>,
    machine: Option<&'a Forecast>,
    history: Vec<Option<Vec<f64>>>,
    kept_humans: usize,
    contributors: BTreeSet<&'a str>,
    settled: bool,
}

/// Replays the log day by day, censoring forecasts according to `policy`,
/// and scores the slot on the censored log.
pub fn apply_policy(
    log: &TournamentLog,
    policy: &AllocationPolicy,
    slot: &SlotConfig,
    seed: u64,
    exec: Exec,
) -> Result<Allocation> {
    policy.validate()?;
    if log.n_ifps() == 0 || log.forecasts().is_empty() {
        return Err(Error::EmptyLog);
    }
    let forecasts = log.forecasts();
    let mut keep = vec![true; forecasts.len()];
    let mut excluded: BTreeMap<String, Day> = BTreeMap::new();
    match policy.kind {
        PolicyKind::All => {}
        PolicyKind::Random { p_keep } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (k, f) in keep.iter_mut().zip(forecasts) {
                if f.source.is_human() {
                    *k = rng.random::<f64>() < p_keep;
                }
            }
        }
        PolicyKind::GreedyIfp { .. } | PolicyKind::GreedyIfpPp { .. } => {
            greedy_pass(log, policy, slot, &mut keep, &mut excluded)?;
        }
    }
    let mut it = keep.iter();
    let censored = log.filtered(|_| *it.next().unwrap());
    let total = forecasts.iter().filter(|f| f.source.is_human()).count();
    let kept = forecasts.iter().zip(&keep).filter(|(f, k)| **k && f.source.is_human()).count();
    let budget = if total == 0 { 100.0 } else { 100.0 * kept as f64 / total as f64 };
    let brier = replay_slot(&censored, slot, exec)?.mean_mdb(&censored)?;
    Ok(Allocation {
        log: censored,
        report: BudgetReport {
            policy: policy.name.clone(),
            seed,
            brier,
            budget,
            kept,
            total,
            excluded_users: excluded.len(),
        },
        excluded,
    })
}

fn greedy_pass(
    log: &TournamentLog,
    policy: &AllocationPolicy,
    slot: &SlotConfig,
    keep: &mut [bool],
    excluded: &mut BTreeMap<String, Day>,
) -> Result<()> {
    let frac = policy.exclude_frac().expect("greedy policy");
    let cap = policy.cap();
    let forecasts = log.forecasts();
    let (first, last) = log.calendar().ok_or(Error::EmptyLog)?;
    let season = Season { first, last };
    let mut batches: BTreeMap<Day, Vec<&Ifp>> = BTreeMap::new();
    for ifp in log.ifps().filter(|i| i.resolved_option.is_some()) {
        batches.entry(ifp.close_date).or_default().push(ifp);
    }
    let mut states: BTreeMap<&str, IfpState> = log
        .ifps()
        .map(|i| {
            let st = IfpState {
                humans: BTreeMap::new(),
                machine: None,
                history: Vec::new(),
                kept_humans: 0,
                contributors: BTreeSet::new(),
                settled: false,
            };
            (i.id.as_str(), st)
        })
        .collect();
    let mut kept_by_ifp: BTreeMap<&str, Vec<&Forecast>> = BTreeMap::new();
    let mut book = SkillBook::default();
    let mut next = 0;
    let mut day = first;
    while day <= last {
        while next < forecasts.len() && forecasts[next].timestamp.day <= day {
            let f = &forecasts[next];
            let st = states.get_mut(f.ifp_id.as_str()).expect("forecast on known ifp");
            let accept = match &f.source {
                Source::Human(u) => {
                    let dropped = excluded.contains_key(u) || cap.is_some_and(|c| st.settled && st.kept_humans >= c);
                    !dropped
                }
                _ => true,
            };
            keep[next] = accept;
            if accept {
                match &f.source {
                    Source::Human(u) => {
                        st.humans.insert(&f.source, f);
                        st.kept_humans += 1;
                        st.contributors.insert(u);
                    }
                    Source::Machine(_) => st.machine = Some(f),
                    Source::Slot(_) => {}
                }
                kept_by_ifp.entry(f.ifp_id.as_str()).or_default().push(f);
            }
            next += 1;
        }
        if cap.is_some() {
            for ifp in log.ifps().filter(|i| i.is_active(day)) {
                let st = states.get_mut(ifp.id.as_str()).unwrap();
                let standing: Vec<&Forecast> = st.humans.values().copied().collect();
                let agg = &slot.aggregation;
                let human = aggregate_standing(&standing, day, agg, &book, season.fraction(day));
                let out = combine_with_machine(human.as_ref(), st.machine.map(|m| m.probs.as_slice()), ifp.is_timeseries(), agg);
                st.history.push(out.ok());
                if !st.settled {
                    st.settled = consensus_reached(&st.history, st.contributors.len(), &policy.consensus);
                }
            }
        }
        if let Some(batch) = batches.get(&day) {
            for ifp in batch {
                let kept = kept_by_ifp.get(ifp.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
                book.record_forecasts(ifp, kept)?;
            }
            let mut ranked: Vec<(f64, &str)> = book
                .records()
                .filter(|r| !excluded.contains_key(&r.user_id))
                .map(|r| (r.mean_z, r.user_id.as_str()))
                .collect();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
            let n_drop = (frac * ranked.len() as f64).floor() as usize;
            let dropped: Vec<String> = ranked[..n_drop].iter().map(|(_, u)| u.to_string()).collect();
            for u in dropped {
                excluded.insert(u, day);
            }
        }
        day = day.offset(1);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::AggregationConfig;
    use crate::domain::{HorizonKind, IfpKind, Timestamp};

    fn ifp(id: &str, open: i32, close: i32) -> Ifp {
        Ifp {
            id: id.into(),
            title: String::new(),
            options: vec!["y".into(), "n".into()],
            kind: IfpKind::Binary,
            open_date: Day(open),
            close_date: Day(close),
            resolved_option: Some(0),
            series_ref: None,
            thresholds: None,
            horizon_kind: HorizonKind::ValueAtClose,
        }
    }

    fn fc(ifp: &str, user: &str, day: i32, p: f64) -> Forecast {
        Forecast {
            ifp_id: ifp.into(),
            source: Source::human(user),
            probs: vec![p, 1.0 - p],
            timestamp: Timestamp::new(Day(day), 0),
        }
    }

    fn log() -> TournamentLog {
        let mut b = TournamentLog::builder();
        b.ifp(ifp("a", 0, 4)).unwrap();
        b.ifp(ifp("b", 0, 20)).unwrap();
        let users = [("good", 0.9), ("ok", 0.7), ("meh", 0.5), ("bad", 0.1)];
        for (u, p) in users {
            b.forecast(fc("a", u, 1, p)).unwrap();
            for d in [2, 6, 10, 14] {
                b.forecast(fc("b", u, d, p)).unwrap();
            }
        }
        b.build()
    }

    fn slot() -> SlotConfig {
        SlotConfig { name: "s".into(), aggregation: AggregationConfig::default() }
    }

    #[test]
    fn swift_order_examples() {
        let a = ifp("a", 0, 10);
        let b = ifp("b", 0, 5);
        let c = ifp("c", 0, 10);
        let pop = BTreeMap::from([("a".to_string(), 10), ("c".to_string(), 2)]);
        let order: Vec<&str> = swift_order(&[&a, &b, &c], Day(1), &pop).iter().map(|i| i.id.as_str()).collect();
        assert_eq!(order, ["b", "c", "a"]);
        assert!(swift_order(&[], Day(1), &pop).is_empty());
    }

    #[test]
    fn consensus_examples() {
        let c = Consensus { threshold: 0.9, window: 3, max_drift: 0.05, min_forecasters: 2 };
        let settled = vec![Some(vec![0.95, 0.05]); 5];
        assert!(consensus_reached(&settled, 2, &c));
        assert!(!consensus_reached(&settled[..1], 2, &c));
        assert!(!consensus_reached(&settled, 1, &c));
        let swinging: Vec<_> = (0..5).map(|i| Some(if i % 2 == 0 { vec![0.99, 0.01] } else { vec![0.91, 0.09] })).collect();
        assert!(!consensus_reached(&swinging, 2, &c));
    }

    #[test]
    fn all_is_identity() {
        let log = log();
        let a = apply_policy(&log, &AllocationPolicy::new("all", PolicyKind::All), &slot(), 0, Exec::Sequential).unwrap();
        assert_eq!(a.log.forecasts(), log.forecasts());
        assert_eq!(a.report.budget, 100.0);
    }

    #[test]
    fn greedy_drops_worst_after_batch() {
        let log = log();
        let p = AllocationPolicy::new("g", PolicyKind::GreedyIfp { exclude_frac: 0.25 });
        let a = apply_policy(&log, &p, &slot(), 0, Exec::Sequential).unwrap();
        assert_eq!(a.excluded, BTreeMap::from([("bad".to_string(), Day(4))]));
        assert!(a.log.forecasts().iter().all(|f| f.source.id() != "bad" || f.timestamp.day <= Day(4)));
        assert_eq!(a.report.kept, 17);
        assert_eq!(a.report.budget, 100.0 * 17.0 / 20.0);
    }

    #[test]
    fn tiny_fraction_and_huge_cap_reduce_to_all() {
        let log = log();
        let all = apply_policy(&log, &AllocationPolicy::new("all", PolicyKind::All), &slot(), 0, Exec::Sequential).unwrap();
        let pp = AllocationPolicy::new("pp", PolicyKind::GreedyIfpPp { exclude_frac: 1e-9, cap: usize::MAX });
        let b = apply_policy(&log, &pp, &slot(), 0, Exec::Sequential).unwrap();
        assert_eq!(b.log.forecasts(), all.log.forecasts());
        assert_eq!(b.report.brier.to_bits(), all.report.brier.to_bits());
    }

    #[test]
    fn cap_stops_forecasts_after_consensus() {
        let mut b = TournamentLog::builder();
        b.ifp(ifp("q", 0, 30)).unwrap();
        for d in 0..30 {
            for u in ["u1", "u2", "u3"] {
                b.forecast(fc("q", u, d, 0.97)).unwrap();
            }
        }
        let log = b.build();
        let mut p = AllocationPolicy::new("pp", PolicyKind::GreedyIfpPp { exclude_frac: 0.1, cap: 3 });
        p.consensus = Consensus { threshold: 0.9, window: 3, max_drift: 0.05, min_forecasters: 3 };
        let a = apply_policy(&log, &p, &slot(), 0, Exec::Sequential).unwrap();
        // Consensus settles at the end of day 2, by which time the cap is long exceeded.
        assert_eq!(a.report.kept, 9);
    }

    #[test]
    fn random_policy_is_seeded() {
        let log = log();
        let p = AllocationPolicy::new("r", PolicyKind::Random { p_keep: 0.5 });
        let a = apply_policy(&log, &p, &slot(), 7, Exec::Sequential).unwrap();
        let b = apply_policy(&log, &p, &slot(), 7, Exec::Sequential).unwrap();
        assert_eq!(a.log.forecasts(), b.log.forecasts());
        assert!(a.report.budget > 0.0 && a.report.budget <= 100.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = [
            PolicyKind::GreedyIfp { exclude_frac: 0.0 },
            PolicyKind::GreedyIfp { exclude_frac: 1.0 },
            PolicyKind::GreedyIfpPp { exclude_frac: 0.5, cap: 2 },
            PolicyKind::Random { p_keep: 0.0 },
        ];
        for k in bad {
            assert!(AllocationPolicy::new("x", k).validate().is_err());
        }
    }
}
