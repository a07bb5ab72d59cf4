use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::world::{stream, STREAM_SPARSITY};
use crate::aggregation::{AggregationConfig, SlotConfig};
use crate::domain::{Fill, Source, TournamentLog};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::replay::replay_slots;
use crate::scoring::{cohens_d, mdb, score_ifp_daily};
use crate::stats::{self, OlsFit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityPoint {
    pub level: f64,
    pub rep: usize,
    pub with_machine: bool,
    pub brier: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityRegression {
    pub with_machine: bool,
    pub fit: OlsFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub points: Vec<SparsityPoint>,
    /// With-machine regression first.
    pub regressions: Vec<SparsityRegression>,
}

impl SparsityReport {
    pub fn slope(&self, with_machine: bool) -> f64 {
        self.regressions.iter().find(|r| r.with_machine == with_machine).map(|r| r.fit.slope).unwrap_or(f64::NAN)
    }
}

/// Deletes a random fraction of forecasters at each level, re-aggregates
/// with and without the machine on the same deletions, and regresses mean
/// Brier on the deleted fraction.
pub fn sparsity_experiment(
    log: &TournamentLog,
    aggregation: &AggregationConfig,
    levels: &[f64],
    reps: usize,
    seed: u64,
    exec: Exec,
) -> Result<SparsityReport> {
    if let Some(&bad) = levels.iter().find(|l| !(0.0..1.0).contains(*l)) {
        return Err(Error::SparsityLevel(bad));
    }
    if levels.is_empty() || reps == 0 {
        return Err(Error::Config("sparsity needs at least one level and one repetition".into()));
    }
    let slots = [
        SlotConfig { name: "with_machine".into(), aggregation: AggregationConfig { include_machine: true, ..aggregation.clone() } },
        SlotConfig { name: "without_machine".into(), aggregation: aggregation.clone().human_only() },
    ];
    let users: Vec<String> = log.human_ids().into_iter().map(String::from).collect();
    let n_drop = |li: usize| (levels[li] * users.len() as f64).round() as usize;
    // Repetitions that delete nobody are identical, so only the first runs.
    let tasks: Vec<(usize, usize)> = (0..levels.len())
        .flat_map(|l| (0..reps).map(move |r| (l, r)))
        .filter(|&(l, r)| r == 0 || n_drop(l) > 0)
        .collect();
    let results = exec.map(&tasks, |&(li, rep)| -> Result<(f64, f64)> {
        let censored = if n_drop(li) == 0 {
            log.filtered(|_| true)
        } else {
            let mut rng = stream(seed, STREAM_SPARSITY, ((li as u64) << 20) | rep as u64);
            let mut order = users.clone();
            order.shuffle(&mut rng);
            let dropped: BTreeSet<&str> = order[..n_drop(li)].iter().map(String::as_str).collect();
            log.filtered(|f| !(f.source.is_human() && dropped.contains(f.source.id())))
        };
        let runs = replay_slots(&censored, &slots, Exec::Sequential)?;
        Ok((runs[0].mean_mdb(&censored)?, runs[1].mean_mdb(&censored)?))
    });
    let mut by_task: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (&task, r) in tasks.iter().zip(results) {
        by_task.insert(task, r?);
    }
    let mut points = Vec::with_capacity(2 * levels.len() * reps);
    for li in 0..levels.len() {
        for rep in 0..reps {
            let key = if n_drop(li) == 0 { (li, 0) } else { (li, rep) };
            let (with, without) = by_task[&key];
            points.push(SparsityPoint { level: levels[li], rep, with_machine: true, brier: with });
            points.push(SparsityPoint { level: levels[li], rep, with_machine: false, brier: without });
        }
    }
    let regressions = [true, false]
        .into_iter()
        .map(|flag| {
            let (x, y): (Vec<f64>, Vec<f64>) =
                points.iter().filter(|p| p.with_machine == flag).map(|p| (p.level, p.brier)).unzip();
            let fit = stats::ols(&x, &y).ok_or_else(|| Error::Config("sparsity regression needs two distinct levels".into()))?;
            Ok(SparsityRegression { with_machine: flag, fit })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SparsityReport { points, regressions })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackcastCell {
    pub pool: String,
    pub slot: String,
    /// True when the slot's forecasts were read from the pool rather than
    /// recomputed.
    pub supplied: bool,
    pub mdb: f64,
    pub per_ifp: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackcastComparison {
    pub a: String,
    pub b: String,
    /// `mdb(b) - mdb(a)`.
    pub delta: f64,
    /// Cohen's d of per-IFP MDBs of `b` against `a` on shared IFPs.
    pub cohens_d: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackcastReport {
    pub cells: Vec<BackcastCell>,
    pub comparisons: Vec<BackcastComparison>,
}

impl BackcastCell {
    pub fn label(&self) -> String {
        format!("{}/{}", self.pool, self.slot)
    }
}

/// Applies every slot to every pool and compares all resulting columns.
/// Slot forecasts already present in a pool are scored as supplied.
pub fn backcast_compare(pools: &[(String, TournamentLog)], slots: &[SlotConfig], exec: Exec) -> Result<BackcastReport> {
    let mut cells = Vec::new();
    for (name, log) in pools {
        for run in replay_slots(log, slots, exec)? {
            cells.push(BackcastCell {
                pool: name.clone(),
                slot: run.slot.clone(),
                supplied: false,
                per_ifp: run.mdb_by_ifp(log)?,
                mdb: run.mean_mdb(log)?,
            });
        }
        let supplied: Vec<&Source> = log.sources().into_iter().filter(|s| matches!(s, Source::Slot(_))).collect();
        for src in supplied {
            let mut per_ifp = BTreeMap::new();
            for ifp in log.ifps().filter(|i| i.resolved_option.is_some()) {
                let scores = score_ifp_daily(log, &ifp.id, src, Fill::Uniform)?;
                per_ifp.insert(ifp.id.clone(), mdb(&scores).ok_or(Error::EmptySample)?);
            }
            let v: Vec<f64> = per_ifp.values().copied().collect();
            cells.push(BackcastCell {
                pool: name.clone(),
                slot: src.id().to_string(),
                supplied: true,
                mdb: stats::mean(&v).ok_or(Error::EmptySample)?,
                per_ifp,
            });
        }
    }
    if cells.len() < 2 {
        return Err(Error::Config("backcast needs at least two pool/slot combinations".into()));
    }
    let mut comparisons = Vec::new();
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            let (a, b) = (&cells[i], &cells[j]);
            let shared: Vec<(f64, f64)> =
                a.per_ifp.iter().filter_map(|(k, va)| b.per_ifp.get(k).map(|vb| (*va, *vb))).collect();
            let (xa, xb): (Vec<f64>, Vec<f64>) = shared.into_iter().unzip();
            comparisons.push(BackcastComparison {
                a: a.label(),
                b: b.label(),
                delta: b.mdb - a.mdb,
                cohens_d: cohens_d(&xb, &xa).ok(),
            });
        }
    }
    Ok(BackcastReport { cells, comparisons })
}

/// Splits a log into one pool per condition tag. Every pool keeps all
/// non-human forecasts; untagged humans form the pool "untagged".
pub fn pool_by_conditions(log: &TournamentLog) -> Vec<(String, TournamentLog)> {
    let mut tags: BTreeSet<&str> = BTreeSet::new();
    for u in log.human_ids() {
        tags.insert(log.condition_of(u).unwrap_or("untagged"));
    }
    tags.into_iter()
        .map(|tag| {
            let pool = log.filtered(|f| !f.source.is_human() || log.condition_of(f.source.id()).unwrap_or("untagged") == tag);
            (tag.to_string(), pool)
        })
        .collect()
}
