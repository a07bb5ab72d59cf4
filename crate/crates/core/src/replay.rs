//! Day-by-day replay of aggregation slots over a tournament log.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::aggregation::{
    aggregate_kept, combine_with_machine, recalibrate_individual, recency_keep_count, Season, SkillBook, SlotConfig,
};
use crate::domain::{uniform_forecast, Day, Forecast, Ifp, Source, Timestamp, TournamentLog};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::scoring::brier_for;
use crate::stats;

/// Skill books as they stood after each resolution batch.
#[derive(Clone, Debug, Default)]
pub struct BookTimeline {
    days: Vec<Day>,
    books: Vec<SkillBook>,
}

impl BookTimeline {
    /// A batch is every resolved IFP closing on the same day.
    pub fn build(log: &TournamentLog) -> Result<BookTimeline> {
        let mut batches: BTreeMap<Day, Vec<&Ifp>> = BTreeMap::new();
        for ifp in log.ifps().filter(|i| i.resolved_option.is_some()) {
            batches.entry(ifp.close_date).or_default().push(ifp);
        }
        let mut timeline = BookTimeline::default();
        let mut book = SkillBook::default();
        for (day, ifps) in batches {
            for ifp in ifps {
                book.record_ifp(log, ifp)?;
            }
            timeline.days.push(day);
            timeline.books.push(book.clone());
        }
        Ok(timeline)
    }

    /// Book available on `day`: batches resolved strictly before it.
    pub fn at(&self, day: Day) -> Option<&SkillBook> {
        let n = self.days.partition_point(|d| *d < day);
        n.checked_sub(1).map(|i| &self.books[i])
    }
}

/// Daily outputs of one slot: per IFP, one entry per active day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRun {
    pub slot: String,
    pub outputs: BTreeMap<String, Vec<Option<Vec<f64>>>>,
}

impl SlotRun {
    pub fn source(&self) -> Source {
        Source::slot(self.slot.clone())
    }

    /// Mean daily Brier per resolved IFP with carry-forward and uniform fill.
    pub fn mdb_by_ifp(&self, log: &TournamentLog) -> Result<BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        for ifp in log.ifps() {
            let Some(outcome) = ifp.resolved_option else { continue };
            let Some(days) = self.outputs.get(&ifp.id) else { continue };
            let uniform = uniform_forecast(ifp.n_options())?;
            let mut standing: &[f64] = &uniform;
            let mut total = 0.0;
            for d in days {
                if let Some(p) = d {
                    standing = p;
                }
                total += brier_for(ifp, standing, outcome)?;
            }
            out.insert(ifp.id.clone(), total / days.len() as f64);
        }
        Ok(out)
    }

    /// Mean over resolved IFPs of the per-IFP MDB.
    pub fn mean_mdb(&self, log: &TournamentLog) -> Result<f64> {
        let v: Vec<f64> = self.mdb_by_ifp(log)?.into_values().collect();
        stats::mean(&v).ok_or(Error::EmptySample)
    }

    /// The slot's daily outputs as forecasts, one per day with an output.
    pub fn to_forecasts(&self, log: &TournamentLog) -> Result<Vec<Forecast>> {
        let mut out = Vec::new();
        for (ifp_id, days) in &self.outputs {
            let ifp = log.ifp(ifp_id)?;
            for (day, p) in ifp.active_days().zip(days) {
                if let Some(p) = p {
                    out.push(Forecast {
                        ifp_id: ifp_id.clone(),
                        source: self.source(),
                        probs: p.clone(),
                        timestamp: Timestamp::new(day, 0),
                    });
                }
            }
        }
        Ok(out)
    }
}

fn replay_ifp(
    log: &TournamentLog,
    ifp: &Ifp,
    slot: &SlotConfig,
    timeline: &BookTimeline,
    season: &Season,
) -> Vec<Option<Vec<f64>>> {
    let config = &slot.aggregation;
    let empty = SkillBook::default();
    let forecasts: Vec<&Forecast> = log.forecasts_for(&ifp.id).collect();
    let recalibrated: Vec<Vec<f64>> = forecasts
        .iter()
        .map(|f| match f.source {
            Source::Human(_) => recalibrate_individual(&f.probs, config.individual_recalibration),
            _ => Vec::new(),
        })
        .collect();
    // Standing human forecasts, newest first with ties by source, as the
    // recency filter orders them.
    let mut latest: BTreeMap<&Source, usize> = BTreeMap::new();
    let mut order: BTreeSet<(Reverse<Timestamp>, &Source, usize)> = BTreeSet::new();
    let mut machine: Option<&Forecast> = None;
    let mut next = 0;
    let mut out = Vec::with_capacity(ifp.active_len());
    let mut kept: Vec<&Forecast> = Vec::new();
    let mut kept_probs: Vec<&[f64]> = Vec::new();
    for day in ifp.active_days() {
        while next < forecasts.len() && forecasts[next].timestamp.day <= day {
            let f = forecasts[next];
            match &f.source {
                Source::Human(_) => {
                    if let Some(old) = latest.insert(&f.source, next) {
                        order.remove(&(Reverse(forecasts[old].timestamp), &f.source, old));
                    }
                    order.insert((Reverse(f.timestamp), &f.source, next));
                }
                Source::Machine(_) => machine = Some(f),
                Source::Slot(_) => {}
            }
            next += 1;
        }
        let keep = recency_keep_count(order.len(), config.recency_fraction, config.min_forecasts_floor);
        kept.clear();
        kept_probs.clear();
        for &(_, _, i) in order.iter().take(keep) {
            kept.push(forecasts[i]);
            kept_probs.push(&recalibrated[i]);
        }
        let book = timeline.at(day).unwrap_or(&empty);
        let human = aggregate_kept(&kept, &kept_probs, day, config, book, season.fraction(day));
        let combined = combine_with_machine(human.as_ref(), machine.map(|m| m.probs.as_slice()), ifp.is_timeseries(), config);
        out.push(combined.ok());
    }
    out
}

/// Replays several slots over the same log, sharing one skill timeline.
pub fn replay_slots(log: &TournamentLog, slots: &[SlotConfig], exec: Exec) -> Result<Vec<SlotRun>> {
    for s in slots {
        s.aggregation.validate()?;
    }
    let season = Season::of(log).ok_or(Error::EmptyLog)?;
    let timeline = BookTimeline::build(log)?;
    let ifps: Vec<&Ifp> = log.ifps().collect();
    Ok(slots
        .iter()
        .map(|slot| {
            let outputs = exec.map(&ifps, |ifp| (ifp.id.clone(), replay_ifp(log, ifp, slot, &timeline, &season)));
            SlotRun { slot: slot.name.clone(), outputs: outputs.into_iter().collect() }
        })
        .collect())
}

pub fn replay_slot(log: &TournamentLog, slot: &SlotConfig, exec: Exec) -> Result<SlotRun> {
    Ok(replay_slots(log, std::slice::from_ref(slot), exec)?.remove(0))
}
