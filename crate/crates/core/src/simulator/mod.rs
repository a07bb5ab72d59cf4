//! Synthetic tournaments: generated series and questions, simulated
//! forecasters with tunable skill and machine anchoring, a PHE2 machine, and
//! the sparsity and backcasting experiments run on top of them.

mod config;
mod experiments;
mod humans;
mod world;

use serde::{Deserialize, Serialize};

pub use config::{Cohort, DurationDist, KindMix, MachineParams, Range, SeriesParams, SimConfig, SkillDist};
pub use experiments::{
    backcast_compare, pool_by_conditions, sparsity_experiment, BackcastCell, BackcastComparison, BackcastReport,
    SparsityPoint, SparsityRegression, SparsityReport,
};
pub use humans::{forecaster_profile, gen_human_forecast, ForecasterProfile};
pub use world::{bin_of, clamped_normal_location, exact_distribution, gen_world, season_start, SimIfp, World};

use crate::aggregation::{AggregationConfig, SlotConfig};
use crate::domain::{Forecast, Source, Timestamp, TournamentLog};
use crate::error::Result;
use crate::exec::Exec;
use crate::replay::{replay_slots, SlotRun};
use crate::tsmodels::{phe2_windowed, AutoArimaConfig};
use humans::{forecaster_stream, MachineTrack};

pub const MACHINE_ID: &str = "phe2";

/// The slots compared by default: the full hybrid pipeline, the same
/// pipeline without the machine, and a plain mean of every standing human forecast.
pub fn default_slots() -> Vec<SlotConfig> {
    vec![
        SlotConfig { name: "hybrid".into(), aggregation: AggregationConfig::default() },
        SlotConfig { name: "human_only".into(), aggregation: AggregationConfig::default().human_only() },
        SlotConfig {
            name: "mean".into(),
            aggregation: AggregationConfig { recency_fraction: 1.0, ..AggregationConfig::plain_mean() }.human_only(),
        },
    ]
}

/// PHE2 forecasts on one question, refitted every `refit_every` days from
/// the open date on the series observed so far.
pub fn machine_track(cfg: &SimConfig, sim: &SimIfp) -> Result<Vec<(crate::Day, Vec<f64>)>> {
    let m = &cfg.machine;
    let Some(series) = sim.series.as_ref().filter(|_| m.enabled) else {
        return Ok(Vec::new());
    };
    let arima = AutoArimaConfig { max_p: m.max_p, max_d: m.max_d, max_q: m.max_q };
    let mut out = Vec::new();
    let mut day = sim.ifp.open_date;
    while day <= sim.ifp.close_date {
        let seen = series.truncated(day);
        let f = phe2_windowed(&seen, &sim.ifp, &arima, Some(m.fit_window), Exec::Sequential)?;
        out.push((day, f.probs));
        day = day.offset(m.refit_every as i32);
    }
    Ok(out)
}

/// A generated world and the full forecast log it produces.
#[derive(Clone, Debug)]
pub struct Tournament {
    pub config: SimConfig,
    pub world: World,
    pub profiles: Vec<ForecasterProfile>,
    pub log: TournamentLog,
}

/// Generates the world, machine forecasts and every human forecast.
pub fn simulate(cfg: &SimConfig, exec: Exec) -> Result<Tournament> {
    let world = gen_world(cfg)?;
    let tracks: Vec<MachineTrack> = exec
        .map(&world.ifps, |sim| machine_track(cfg, sim))
        .into_iter()
        .collect::<Result<_>>()?;
    let (first, last) = world.calendar();
    let n_days = last.since(first) as usize + 1;
    let mut open_by_day = vec![Vec::new(); n_days];
    for (i, sim) in world.ifps.iter().enumerate() {
        for d in sim.ifp.active_days() {
            open_by_day[d.since(first) as usize].push(i);
        }
    }
    let humans = exec.map_range(cfg.n_forecasters, |u| forecaster_stream(cfg, u, &world, &open_by_day, &tracks));

    let mut b = TournamentLog::builder();
    for sim in &world.ifps {
        b.ifp(sim.ifp.clone())?;
    }
    let machine = Source::machine(MACHINE_ID);
    for (sim, track) in world.ifps.iter().zip(&tracks) {
        for (day, probs) in track {
            b.forecast(Forecast {
                ifp_id: sim.ifp.id.clone(),
                source: machine.clone(),
                probs: probs.clone(),
                timestamp: Timestamp::new(*day, 0),
            })?;
        }
    }
    let mut profiles = Vec::with_capacity(humans.len());
    for (profile, forecasts) in humans {
        b.condition(profile.id.clone(), profile.cohort.clone());
        for f in forecasts {
            b.forecast(f)?;
        }
        profiles.push(profile);
    }
    Ok(Tournament { config: cfg.clone(), world, profiles, log: b.build() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotSummary {
    pub slot: String,
    pub mean_mdb: f64,
}

#[derive(Clone, Debug)]
pub struct SimResult {
    pub tournament: Tournament,
    pub runs: Vec<SlotRun>,
    pub summary: Vec<SlotSummary>,
}

impl SimResult {
    pub fn mean_mdb(&self, slot: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.slot == slot).map(|s| s.mean_mdb)
    }
}

/// Simulates a tournament and replays every slot over it.
pub fn run_tournament(cfg: &SimConfig, slots: &[SlotConfig], exec: Exec) -> Result<SimResult> {
    let tournament = simulate(cfg, exec)?;
    let runs = replay_slots(&tournament.log, slots, exec)?;
    let summary = runs
        .iter()
        .map(|r| Ok(SlotSummary { slot: r.slot.clone(), mean_mdb: r.mean_mdb(&tournament.log)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimResult { tournament, runs, summary })
}
