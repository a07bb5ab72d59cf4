use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hybrid_forecast::allocation::{apply_policy, BudgetReport};
use hybrid_forecast::io::{self, IngestMapping, RunConfig, DEFAULT_MAX_REJECT_RATE};
use hybrid_forecast::replay::replay_slots;
use hybrid_forecast::scoring::ScoreReport;
use hybrid_forecast::simulator::{backcast_compare, pool_by_conditions, run_tournament, simulate, sparsity_experiment, SlotSummary};
use hybrid_forecast::tsmodels::{phe2_windowed, Phe2Forecast, Series};
use hybrid_forecast::{Day, Error, Exec, Forecast, Ifp, Source, Timestamp, TournamentLog};
use serde::Serialize;

use crate::output::Output;
use crate::{Cli, Command, Inputs};

pub fn run(cli: &Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.simulation.seed = seed;
    }
    let seed = config.simulation.seed;
    let exec = cli.exec();
    let name = match &cli.command {
        Command::Score { .. } => "score",
        Command::Aggregate { .. } => "aggregate",
        Command::TsForecast { .. } => "ts-forecast",
        Command::Simulate => "simulate",
        Command::Sparsity { .. } => "sparsity",
        Command::Allocate { .. } => "allocate",
        Command::Backcast { .. } => "backcast",
    };
    let mut out = Output::new(&cli.out_dir, name, &config, Some(seed))?;
    if let Some(p) = &cli.config {
        out.input(p)?;
    }
    match &cli.command {
        Command::Score { inputs } => score(cli, &config, inputs, &mut out, exec)?,
        Command::Aggregate { inputs } => aggregate(cli, &config, inputs, &mut out, exec)?,
        Command::TsForecast { inputs, series, as_of } => ts_forecast(&config, inputs, series, as_of.as_deref(), &mut out, exec)?,
        Command::Simulate => simulate_cmd(&config, &mut out, exec)?,
        Command::Sparsity { inputs } => sparsity(cli, &config, inputs, &mut out, exec)?,
        Command::Allocate { inputs } => allocate(cli, &config, inputs, &mut out, exec)?,
        Command::Backcast { inputs, pools } => backcast(cli, &config, inputs, pools, &mut out, exec)?,
    }
    out.finish()
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())).into())
}

fn read_ifp_file(inputs: &Inputs, out: &mut Output) -> Result<Vec<Ifp>> {
    let path = match (&inputs.ifps, &inputs.input_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => d.join(io::IFPS_FILE),
        (None, None) => return Err(Error::Config("no IFP file given (use --ifps or --input-dir)".into()).into()),
    };
    out.input(&path)?;
    Ok(io::read_ifps(open(&path)?)?)
}

/// Loads the input log, or `None` when no forecast input was given.
fn load_log(cli: &Cli, inputs: &Inputs, out: &mut Output) -> Result<Option<TournamentLog>> {
    let forecasts = match (&inputs.forecasts, &inputs.input_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => d.join(io::FORECASTS_FILE),
        (None, None) => return Ok(None),
    };
    let ifps = read_ifp_file(inputs, out)?;
    out.input(&forecasts)?;
    let conditions: Option<PathBuf> = inputs
        .conditions
        .clone()
        .or_else(|| inputs.input_dir.as_ref().map(|d| d.join(io::CONDITIONS_FILE)).filter(|p| p.exists()));
    let mut log = match &cli.mapping {
        None => {
            let mut b = TournamentLog::builder();
            for ifp in ifps {
                b.ifp(ifp)?;
            }
            for f in io::read_forecasts(open(&forecasts)?)? {
                b.forecast_verbatim(f)?;
            }
            b.build()
        }
        Some(mp) => {
            out.input(mp)?;
            let text = std::fs::read_to_string(mp).map_err(|e| Error::Io(format!("{}: {e}", mp.display())))?;
            let mapping: IngestMapping =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("mapping {}: {e}", mp.display())))?;
            let got = io::ingest(open(&forecasts)?, ifps, &mapping)?;
            out.write("rejects.csv", |w| io::write_rejects(w, &got.rejects))?;
            got.check(if cli.strict { 0.0 } else { DEFAULT_MAX_REJECT_RATE })?;
            got.log
        }
    };
    if let Some(c) = conditions {
        out.input(&c)?;
        let mut b = log.to_builder();
        for (user, tag) in io::read_conditions(open(&c)?)? {
            b.condition(user, tag);
        }
        log = b.build();
    }
    Ok(Some(log))
}

fn require_log(cli: &Cli, inputs: &Inputs, out: &mut Output) -> Result<TournamentLog> {
    load_log(cli, inputs, out)?
        .ok_or_else(|| Error::Config("no forecast input given (use --forecasts or --input-dir)".into()).into())
}

fn score(cli: &Cli, config: &RunConfig, inputs: &Inputs, out: &mut Output, exec: Exec) -> Result<()> {
    let log = require_log(cli, inputs, out)?;
    let sources: Vec<Source> = log.sources().into_iter().cloned().collect();
    let baseline = config.scoring.baseline.as_deref().map(str::parse::<Source>).transpose()?;
    let report = ScoreReport::build(&log, &sources, baseline.as_ref(), config.scoring.standardize, exec)?;
    out.write("scores.csv", |w| io::write_daily_scores(w, &report.daily))?;
    out.write("standardized.csv", |w| io::write_standardized(w, &report.daily, &report.standardized))?;
    out.write("summary.csv", |w| io::write_source_summaries(w, &report.summaries))?;
    #[derive(Serialize)]
    struct Summary<'a> {
        resolved_ifps: usize,
        daily_scores: usize,
        baseline: Option<String>,
        sources: &'a [hybrid_forecast::scoring::SourceSummary],
    }
    out.json(
        "summary.json",
        &Summary {
            resolved_ifps: log.ifps().filter(|i| i.resolved_option.is_some()).count(),
            daily_scores: report.daily.len(),
            baseline: baseline.map(|b| b.to_string()),
            sources: &report.summaries,
        },
    )
}

fn slot_outputs(log: &TournamentLog, config: &RunConfig, out: &mut Output, exec: Exec) -> Result<Vec<SlotSummary>> {
    let runs = replay_slots(log, &config.slots, exec)?;
    let mut forecasts: Vec<Forecast> = Vec::new();
    let mut summary = Vec::new();
    let any_resolved = log.ifps().any(|i| i.resolved_option.is_some());
    for run in &runs {
        forecasts.extend(run.to_forecasts(log)?);
        if any_resolved {
            summary.push(SlotSummary { slot: run.slot.clone(), mean_mdb: run.mean_mdb(log)? });
        }
    }
    out.write("slot_forecasts.csv", |w| io::write_forecasts(w, &forecasts))?;
    out.write("slot_summary.csv", |w| io::write_slot_summaries(w, &summary))?;
    Ok(summary)
}

fn aggregate(cli: &Cli, config: &RunConfig, inputs: &Inputs, out: &mut Output, exec: Exec) -> Result<()> {
    let log = require_log(cli, inputs, out)?;
    let summary = slot_outputs(&log, config, out, exec)?;
    out.json("summary.json", &summary)
}

#[derive(Serialize)]
struct MachineRecord {
    ifp_id: String,
    date: String,
    forecast: Option<Phe2Forecast>,
    skipped: Option<String>,
}

fn ts_forecast(
    config: &RunConfig,
    inputs: &Inputs,
    series_path: &Path,
    as_of: Option<&str>,
    out: &mut Output,
    exec: Exec,
) -> Result<()> {
    let ifps = read_ifp_file(inputs, out)?;
    out.input(series_path)?;
    let series: BTreeMap<String, Series> =
        io::read_series(open(series_path)?)?.into_iter().map(|s| (s.id.clone(), s)).collect();
    let as_of: Option<Day> = as_of.map(str::parse).transpose()?;
    let linked: Vec<&Ifp> = ifps.iter().filter(|i| i.series_ref.is_some() && i.thresholds.is_some()).collect();
    let m = &config.machine;
    let records: Vec<MachineRecord> = exec.map(&linked, |ifp| {
        let sref = ifp.series_ref.as_deref().unwrap();
        let skip = |day: Option<Day>, why: String| MachineRecord {
            ifp_id: ifp.id.clone(),
            date: day.map(|d| d.to_string()).unwrap_or_default(),
            forecast: None,
            skipped: Some(why),
        };
        let Some(s) = series.get(sref) else { return skip(None, format!("series {sref:?} not found")) };
        let seen = match as_of {
            Some(d) => s.truncated(d),
            None => s.clone(),
        };
        let Some(day) = as_of.or(seen.last_day()) else { return skip(None, "no observations".into()) };
        if !ifp.is_active(day) {
            return skip(Some(day), "forecast date outside the active window".into());
        }
        match phe2_windowed(&seen, ifp, &m.arima, m.fit_window, Exec::Sequential) {
            Ok(f) => MachineRecord { ifp_id: ifp.id.clone(), date: day.to_string(), forecast: Some(f), skipped: None },
            Err(e) => skip(Some(day), e.to_string()),
        }
    });
    let source = Source::machine(m.model_id.clone());
    let mut forecasts = Vec::new();
    for r in &records {
        if let Some(f) = &r.forecast {
            forecasts.push(Forecast {
                ifp_id: r.ifp_id.clone(),
                source: source.clone(),
                probs: f.probs.clone(),
                timestamp: Timestamp::new(r.date.parse()?, 0),
            });
        }
    }
    out.write("machine_forecasts.csv", |w| io::write_forecasts(w, &forecasts))?;
    out.json("models.json", &records)
}

fn simulate_cmd(config: &RunConfig, out: &mut Output, exec: Exec) -> Result<()> {
    let result = run_tournament(&config.simulation, &config.slots, exec)?;
    let t = &result.tournament;
    let log = &t.log;
    out.write(io::IFPS_FILE, |w| io::write_ifps(w, log.ifps()))?;
    out.write(io::FORECASTS_FILE, |w| io::write_forecasts(w, log.forecasts()))?;
    out.write(io::CONDITIONS_FILE, |w| io::write_conditions(w, log.conditions()))?;
    out.write(io::SERIES_FILE, |w| io::write_series(w, t.world.ifps.iter().filter_map(|s| s.series.as_ref())))?;
    out.write("profiles.csv", |w| {
        io::write_table(
            w,
            ["user_id", "cohort", "anchor_to_machine", "truth_weight", "noise_scale"],
            t.profiles.iter().map(|p| {
                [
                    p.id.clone(),
                    p.cohort.clone(),
                    p.anchor_to_machine.to_string(),
                    p.truth_weight.to_string(),
                    p.noise_scale.to_string(),
                ]
            }),
        )
    })?;
    let mut forecasts: Vec<Forecast> = Vec::new();
    for run in &result.runs {
        forecasts.extend(run.to_forecasts(log)?);
    }
    out.write("slot_forecasts.csv", |w| io::write_forecasts(w, &forecasts))?;
    out.write("slot_summary.csv", |w| io::write_slot_summaries(w, &result.summary))?;
    #[derive(Serialize)]
    struct Summary<'a> {
        seed: u64,
        n_ifps: usize,
        n_forecasts: usize,
        n_forecasters: usize,
        slots: &'a [SlotSummary],
    }
    out.json(
        "summary.json",
        &Summary {
            seed: config.simulation.seed,
            n_ifps: log.n_ifps(),
            n_forecasts: log.forecasts().len(),
            n_forecasters: log.human_ids().len(),
            slots: &result.summary,
        },
    )
}

fn input_or_simulated(cli: &Cli, config: &RunConfig, inputs: &Inputs, out: &mut Output, exec: Exec) -> Result<TournamentLog> {
    match load_log(cli, inputs, out)? {
        Some(log) => Ok(log),
        None => Ok(simulate(&config.simulation, exec)?.log),
    }
}

fn sparsity(cli: &Cli, config: &RunConfig, inputs: &Inputs, out: &mut Output, exec: Exec) -> Result<()> {
    let log = input_or_simulated(cli, config, inputs, out, exec)?;
    let sp = &config.sparsity;
    let slot = config.slot(sp.slot.as_deref())?;
    let report = sparsity_experiment(&log, &slot.aggregation, &sp.levels, sp.reps, config.simulation.seed, exec)?;
    out.write("sparsity_points.csv", |w| io::write_sparsity_points(w, &report.points))?;
    out.write("sparsity_regression.csv", |w| io::write_sparsity_regressions(w, &report.regressions))?;
    out.json("summary.json", &report.regressions)
}

fn allocate(cli: &Cli, config: &RunConfig, inputs: &Inputs, out: &mut Output, exec: Exec) -> Result<()> {
    let alloc = &config.allocation;
    let slot = config.slot(alloc.slot.as_deref())?;
    let base = config.simulation.seed;
    let runs: Vec<(u64, TournamentLog)> = match load_log(cli, inputs, out)? {
        Some(log) => vec![(base, log)],
        None => (0..alloc.runs.max(1) as u64)
            .map(|r| {
                let cfg = hybrid_forecast::simulator::SimConfig { seed: base + r, ..config.simulation.clone() };
                Ok((cfg.seed, simulate(&cfg, exec)?.log))
            })
            .collect::<hybrid_forecast::Result<_>>()?,
    };
    let mut reports: Vec<BudgetReport> = Vec::new();
    for (seed, log) in &runs {
        for policy in &alloc.policies {
            let a = apply_policy(log, policy, slot, *seed, exec).with_context(|| format!("policy {}", policy.name))?;
            reports.push(a.report);
        }
    }
    out.write("budget.csv", |w| io::write_budget_reports(w, &reports))?;
    out.json("summary.json", &reports)
}

fn backcast(cli: &Cli, config: &RunConfig, inputs: &Inputs, extra: &[String], out: &mut Output, exec: Exec) -> Result<()> {
    let mut pools: Vec<(String, TournamentLog)> = Vec::new();
    if let Some(log) = load_log(cli, inputs, out)? {
        pools.extend(pool_by_conditions(&log));
    }
    for entry in extra {
        let (name, dir) = entry
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("pool {entry:?} is not NAME=DIR")))?;
        let dir = Path::new(dir);
        for f in [io::IFPS_FILE, io::FORECASTS_FILE] {
            out.input(&dir.join(f))?;
        }
        pools.push((name.to_string(), io::import_log(dir)?));
    }
    let report = backcast_compare(&pools, &config.slots, exec)?;
    out.write("backcast_cells.csv", |w| io::write_backcast_cells(w, &report.cells))?;
    out.write("backcast_comparisons.csv", |w| io::write_backcast_comparisons(w, &report.comparisons))?;
    out.json("summary.json", &report.comparisons)
}
