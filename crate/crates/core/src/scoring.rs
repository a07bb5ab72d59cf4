//! Brier scoring: nominal and ordinal forms, mean daily Brier with
//! carry-forward, individual scoring with cohort-median imputation,
//! standardization, and effect sizes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{standing_by_day, uniform_forecast, Day, Fill, Forecast, Ifp, Source, TournamentLog};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::stats::{self, Summary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyScore {
    pub ifp_id: String,
    pub source: Source,
    pub day: Day,
    pub brier: f64,
}

fn check_outcome(probs: &[f64], outcome: usize) -> Result<()> {
    if outcome >= probs.len() {
        return Err(Error::OutcomeRange { outcome, options: probs.len() });
    }
    if let Some(i) = probs.iter().position(|p| !p.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

/// Sum of squared differences from the one-hot outcome, in [0, 2].
pub fn brier_nominal(probs: &[f64], outcome: usize) -> Result<f64> {
    check_outcome(probs, outcome)?;
    Ok(probs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let o = if i == outcome { 1.0 } else { 0.0 };
            (p - o).powi(2)
        })
        .sum())
}

/// Mean of the two-category Briers over the C-1 cumulative splits of an
/// ordered option set. For two options this is the nominal Brier.
pub fn brier_ordinal(probs: &[f64], outcome: usize) -> Result<f64> {
    check_outcome(probs, outcome)?;
    let c = probs.len();
    if c < 2 {
        return Err(Error::NotOrdinal);
    }
    let mut cum = 0.0;
    let mut total = 0.0;
    for k in 1..c {
        cum += probs[k - 1];
        let hit = if outcome < k { 1.0 } else { 0.0 };
        // Both halves of the split contribute the same squared error.
        total += 2.0 * (cum - hit).powi(2);
    }
    Ok(total / (c - 1) as f64)
}

/// Brier form appropriate for the IFP: ordinal for ordered questions with
/// three or more options, nominal otherwise.
pub fn brier_for(ifp: &Ifp, probs: &[f64], outcome: usize) -> Result<f64> {
    if ifp.is_ordered() {
        brier_ordinal(probs, outcome)
    } else {
        brier_nominal(probs, outcome)
    }
}

fn outcome_of(ifp: &Ifp) -> Result<usize> {
    ifp.resolved_option.ok_or_else(|| Error::Unresolved(ifp.id.clone()))
}

/// Daily Brier scores of one source across the active days of a resolved IFP.
/// Under `Fill::None` days before the source's first forecast are omitted.
pub fn score_ifp_daily(
    log: &TournamentLog,
    ifp_id: &str,
    source: &Source,
    fill: Fill,
) -> Result<Vec<DailyScore>> {
    let ifp = log.ifp(ifp_id)?;
    let own: Vec<_> = log.forecasts_for(ifp_id).filter(|f| &f.source == source).collect();
    score_daily_from(ifp, source, &own, fill)
}

/// As [`score_ifp_daily`] for forecasts already grouped by source and in
/// timestamp order.
pub fn score_daily_from(ifp: &Ifp, source: &Source, own: &[&Forecast], fill: Fill) -> Result<Vec<DailyScore>> {
    let outcome = outcome_of(ifp)?;
    let standing = standing_by_day(ifp, own);
    let uniform = uniform_forecast(ifp.n_options())?;
    let mut out = Vec::with_capacity(standing.len());
    for (day, probs) in ifp.active_days().zip(standing) {
        let probs = match (probs, fill) {
            (Some(p), _) => p,
            (None, Fill::Uniform) => uniform.as_slice(),
            (None, Fill::None) => continue,
        };
        out.push(DailyScore {
            ifp_id: ifp.id.clone(),
            source: source.clone(),
            day,
            brier: brier_for(ifp, probs, outcome)?,
        });
    }
    Ok(out)
}

/// Mean daily Brier.
pub fn mdb(scores: &[DailyScore]) -> Option<f64> {
    let v: Vec<f64> = scores.iter().map(|s| s.brier).collect();
    stats::mean(&v)
}

/// Per-(IFP, day) median of daily scores among a cohort of human forecasters
/// with a standing forecast on that day.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CohortMedians {
    table: BTreeMap<(String, Day), f64>,
}

impl CohortMedians {
    pub fn from_table(table: BTreeMap<(String, Day), f64>) -> Self {
        CohortMedians { table }
    }

    pub fn get(&self, ifp_id: &str, day: Day) -> Option<f64> {
        self.table.get(&(ifp_id.to_string(), day)).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }
}

pub fn cohort_daily_medians(log: &TournamentLog, users: &[&str]) -> Result<CohortMedians> {
    let mut table = BTreeMap::new();
    for ifp in log.ifps().filter(|i| i.resolved_option.is_some()) {
        let mut per_day: Vec<Vec<f64>> = vec![Vec::new(); ifp.active_len()];
        for user in users {
            for s in score_ifp_daily(log, &ifp.id, &Source::human(*user), Fill::None)? {
                per_day[s.day.since(ifp.open_date) as usize].push(s.brier);
            }
        }
        for (offset, scores) in per_day.iter().enumerate() {
            if let Some(m) = stats::median(scores) {
                table.insert((ifp.id.clone(), ifp.open_date.offset(offset as i32)), m);
            }
        }
    }
    Ok(CohortMedians { table })
}

/// IFP score for an individual: own daily scores where a forecast stands,
/// the cohort median before the first forecast. Days with neither fall back
/// to `fallback` (the uniform-prior score). Returns `None` when the user
/// never forecast.
pub fn impute_ifp_score(own: &[Option<f64>], medians: &[Option<f64>], fallback: f64) -> Option<f64> {
    own.iter().any(Option::is_some).then(|| {
        let total: f64 = own
            .iter()
            .zip(medians)
            .map(|(o, m)| o.or(*m).unwrap_or(fallback))
            .sum();
        total / own.len() as f64
    })
}

/// Mean over attempted resolved IFPs of the user's imputed mean daily Brier.
pub fn mmdb_individual(log: &TournamentLog, user: &str, medians: &CohortMedians) -> Result<f64> {
    if medians.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let source = Source::human(user);
    let mut per_ifp = Vec::new();
    for ifp in log.ifps().filter(|i| i.resolved_option.is_some()) {
        let mut own = vec![None; ifp.active_len()];
        for s in score_ifp_daily(log, &ifp.id, &source, Fill::None)? {
            own[s.day.since(ifp.open_date) as usize] = Some(s.brier);
        }
        let meds: Vec<Option<f64>> = ifp.active_days().map(|d| medians.get(&ifp.id, d)).collect();
        let fallback = brier_for(ifp, &uniform_forecast(ifp.n_options())?, outcome_of(ifp)?)?;
        if let Some(score) = impute_ifp_score(&own, &meds, fallback) {
            per_ifp.push(score);
        }
    }
    stats::mean(&per_ifp).ok_or(Error::EmptySample)
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardizeLevel {
    #[default]
    IfpDay,
    Ifp,
}

/// z-scores within each (IFP, day) group, or within each IFP. Groups with
/// zero or undefined spread map to 0.
pub fn standardize(scores: &[DailyScore], level: StandardizeLevel) -> Vec<f64> {
    let mut groups: BTreeMap<(&str, Option<Day>), Vec<usize>> = BTreeMap::new();
    for (i, s) in scores.iter().enumerate() {
        let day = match level {
            StandardizeLevel::IfpDay => Some(s.day),
            StandardizeLevel::Ifp => None,
        };
        groups.entry((s.ifp_id.as_str(), day)).or_default().push(i);
    }
    let mut z = vec![0.0; scores.len()];
    for idx in groups.values() {
        let xs: Vec<f64> = idx.iter().map(|&i| scores[i].brier).collect();
        let m = stats::mean(&xs).unwrap_or(0.0);
        match stats::sample_sd(&xs) {
            Some(sd) if sd > 0.0 => {
                for (&i, x) in idx.iter().zip(&xs) {
                    z[i] = (x - m) / sd;
                }
            }
            _ => {}
        }
    }
    z
}

/// Standardized mean difference with the pooled two-sample standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let va = stats::sample_variance(a).unwrap_or(0.0);
    let vb = stats::sample_variance(b).unwrap_or(0.0);
    let dof = na + nb - 2.0;
    if dof <= 0.0 {
        return Err(Error::ZeroPooledSd);
    }
    let pooled = (((na - 1.0) * va + (nb - 1.0) * vb) / dof).sqrt();
    if pooled == 0.0 {
        return Err(Error::ZeroPooledSd);
    }
    Ok((stats::mean(a).unwrap() - stats::mean(b).unwrap()) / pooled)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub source: Source,
    pub mmdb: f64,
    pub mdb_summary: Summary,
    /// Cohen's d of this source's per-IFP MDBs against the baseline's.
    pub cohens_d_vs_baseline: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub daily: Vec<DailyScore>,
    /// Standardized score aligned with `daily`.
    pub standardized: Vec<f64>,
    pub mdb: BTreeMap<(Source, String), f64>,
    pub summaries: Vec<SourceSummary>,
    pub baseline: Option<Source>,
}

impl ScoreReport {
    /// Scores every listed source on every resolved IFP with uniform fill.
    pub fn build(
        log: &TournamentLog,
        sources: &[Source],
        baseline: Option<&Source>,
        level: StandardizeLevel,
        exec: Exec,
    ) -> Result<ScoreReport> {
        let resolved: Vec<&Ifp> = log.ifps().filter(|i| i.resolved_option.is_some()).collect();
        let per_ifp: Vec<Result<Vec<DailyScore>>> = exec.map(&resolved, |ifp| {
            let mut v = Vec::new();
            for s in sources {
                v.extend(score_ifp_daily(log, &ifp.id, s, Fill::Uniform)?);
            }
            Ok(v)
        });
        let mut daily = Vec::new();
        for r in per_ifp {
            daily.extend(r?);
        }
        let standardized = standardize(&daily, level);

        let mut grouped: BTreeMap<(Source, String), Vec<f64>> = BTreeMap::new();
        for s in &daily {
            grouped
                .entry((s.source.clone(), s.ifp_id.clone()))
                .or_default()
                .push(s.brier);
        }
        let mdb: BTreeMap<(Source, String), f64> = grouped
            .into_iter()
            .map(|(k, v)| (k, stats::mean(&v).unwrap()))
            .collect();

        let mdbs_of = |src: &Source| -> Vec<f64> {
            resolved
                .iter()
                .filter_map(|i| mdb.get(&(src.clone(), i.id.clone())).copied())
                .collect()
        };
        let base = baseline.map(mdbs_of);
        let mut summaries = Vec::new();
        for s in sources {
            let v = mdbs_of(s);
            let Some(summary) = Summary::of(&v) else { continue };
            summaries.push(SourceSummary {
                source: s.clone(),
                mmdb: summary.mean,
                mdb_summary: summary,
                cohens_d_vs_baseline: base.as_ref().and_then(|b| cohens_d(&v, b).ok()),
            });
        }
        Ok(ScoreReport {
            daily,
            standardized,
            mdb,
            summaries,
            baseline: baseline.cloned(),
        })
    }

    pub fn mmdb(&self, source: &Source) -> Option<f64> {
        self.summaries.iter().find(|s| &s.source == source).map(|s| s.mmdb)
    }
}
