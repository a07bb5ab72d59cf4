use std::io::Write;

use crate::allocation::BudgetReport;
use crate::error::Result;
use crate::scoring::{DailyScore, SourceSummary};
use crate::simulator::{BackcastCell, BackcastComparison, SlotSummary, SparsityPoint, SparsityRegression};

pub const SCORES_HEADER: [&str; 4] = ["ifp_id", "source", "day", "brier"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes a header and rows to `w` as CSV.
pub fn write_table<const N: usize>(w: impl Write, header: [&str; N], rows: impl IntoIterator<Item = [String; N]>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_daily_scores(w: impl Write, scores: &[DailyScore]) -> Result<()> {
    write_table(
        w,
        SCORES_HEADER,
        scores.iter().map(|s| [s.ifp_id.clone(), s.source.to_string(), s.day.to_string(), s.brier.to_string()]),
    )
}

pub fn write_standardized(w: impl Write, scores: &[DailyScore], z: &[f64]) -> Result<()> {
    write_table(
        w,
        ["ifp_id", "source", "day", "z"],
        scores.iter().zip(z).map(|(s, z)| [s.ifp_id.clone(), s.source.to_string(), s.day.to_string(), z.to_string()]),
    )
}

pub fn write_source_summaries(w: impl Write, summaries: &[SourceSummary]) -> Result<()> {
    write_table(
        w,
        ["source", "n_ifps", "mmdb", "sd", "q1", "median", "q3", "cohens_d_vs_baseline"],
        summaries.iter().map(|s| {
            let m = &s.mdb_summary;
            [
                s.source.to_string(),
                m.n.to_string(),
                s.mmdb.to_string(),
                m.sd.to_string(),
                m.q1.to_string(),
                m.median.to_string(),
                m.q3.to_string(),
                opt(s.cohens_d_vs_baseline),
            ]
        }),
    )
}

pub fn write_slot_summaries(w: impl Write, summaries: &[SlotSummary]) -> Result<()> {
    write_table(w, ["slot", "mean_mdb"], summaries.iter().map(|s| [s.slot.clone(), s.mean_mdb.to_string()]))
}

pub fn write_sparsity_points(w: impl Write, points: &[SparsityPoint]) -> Result<()> {
    write_table(
        w,
        ["level", "rep", "with_machine", "brier"],
        points.iter().map(|p| [p.level.to_string(), p.rep.to_string(), p.with_machine.to_string(), p.brier.to_string()]),
    )
}

pub fn write_sparsity_regressions(w: impl Write, regressions: &[SparsityRegression]) -> Result<()> {
    write_table(
        w,
        ["with_machine", "n", "slope", "intercept", "slope_se", "slope_ci_low", "slope_ci_high"],
        regressions.iter().map(|r| {
            let f = &r.fit;
            [
                r.with_machine.to_string(),
                f.n.to_string(),
                f.slope.to_string(),
                f.intercept.to_string(),
                f.slope_se.to_string(),
                f.slope_ci_low.to_string(),
                f.slope_ci_high.to_string(),
            ]
        }),
    )
}

pub fn write_budget_reports(w: impl Write, reports: &[BudgetReport]) -> Result<()> {
    write_table(
        w,
        ["policy", "seed", "brier", "budget", "kept", "total", "excluded_users"],
        reports.iter().map(|r| {
            [
                r.policy.clone(),
                r.seed.to_string(),
                r.brier.to_string(),
                r.budget.to_string(),
                r.kept.to_string(),
                r.total.to_string(),
                r.excluded_users.to_string(),
            ]
        }),
    )
}

pub fn write_backcast_cells(w: impl Write, cells: &[BackcastCell]) -> Result<()> {
    write_table(
        w,
        ["pool", "slot", "supplied", "n_ifps", "mdb"],
        cells.iter().map(|c| {
            [c.pool.clone(), c.slot.clone(), c.supplied.to_string(), c.per_ifp.len().to_string(), c.mdb.to_string()]
        }),
    )
}

pub fn write_backcast_comparisons(w: impl Write, comparisons: &[BackcastComparison]) -> Result<()> {
    write_table(
        w,
        ["a", "b", "delta", "cohens_d"],
        comparisons.iter().map(|c| [c.a.clone(), c.b.clone(), c.delta.to_string(), opt(c.cohens_d)]),
    )
}
