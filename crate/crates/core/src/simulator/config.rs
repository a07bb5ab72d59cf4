use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DurationDist {
    pub mean: f64,
    pub sd: f64,
    pub min: u32,
}

impl Default for DurationDist {
    fn default() -> Self {
        DurationDist { mean: 87.0, sd: 56.0, min: 14 }
    }
}

/// Shares of question kinds; normalized when sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KindMix {
    pub binary: f64,
    pub ordinal: f64,
    pub nominal: f64,
}

impl Default for KindMix {
    fn default() -> Self {
        KindMix { binary: 0.51, ordinal: 0.39, nominal: 0.10 }
    }
}

/// ARIMA(1,1,0) with drift: `dy_t = drift + phi (dy_{t-1} - drift) + e_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeriesParams {
    pub phi: f64,
    pub drift: f64,
    pub noise_sd: f64,
    pub start_level: f64,
    /// Observations generated before a question opens.
    pub history_days: u32,
}

impl Default for SeriesParams {
    fn default() -> Self {
        SeriesParams { phi: 0.5, drift: 0.05, noise_sd: 1.0, start_level: 100.0, history_days: 365 }
    }
}

/// Uniform range `[low, high]`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub low: f64,
    pub high: f64,
}

impl Range {
    pub const fn new(low: f64, high: f64) -> Self {
        Range { low, high }
    }

    pub fn point(v: f64) -> Self {
        Range { low: v, high: v }
    }
}

/// Per-forecaster skill draws. `truth_weight` is the exponent applied to
/// the true posterior (0 gives uniform, 1 the posterior itself);
/// `noise_scale` is the sd of log-odds noise between options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkillDist {
    pub truth_weight: Range,
    pub noise_scale: Range,
}

impl Default for SkillDist {
    fn default() -> Self {
        SkillDist { truth_weight: Range::new(0.2, 0.7), noise_scale: Range::new(0.5, 2.0) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub name: String,
    pub share: f64,
    /// Weight on the standing machine forecast when one is visible.
    pub anchor_to_machine: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MachineParams {
    pub enabled: bool,
    pub refit_every: u32,
    /// Most recent observations used for each fit.
    pub fit_window: usize,
    pub max_p: usize,
    pub max_d: usize,
    pub max_q: usize,
}

impl Default for MachineParams {
    fn default() -> Self {
        MachineParams { enabled: true, refit_every: 7, fit_window: 120, max_p: 2, max_d: 1, max_q: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub n_ifps: usize,
    /// Questions open uniformly over this many days from season start.
    pub open_span_days: u32,
    pub duration: DurationDist,
    pub kinds: KindMix,
    /// Share of series questions resolved on the sum over their window.
    pub sum_over_window_share: f64,
    /// Dirichlet concentration of nominal base rates.
    pub nominal_concentration: f64,
    pub n_forecasters: usize,
    /// Mean forecasts per forecaster per week.
    pub activity_rate: f64,
    pub skill: SkillDist,
    pub cohorts: Vec<Cohort>,
    pub series: SeriesParams,
    pub machine: MachineParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            n_ifps: 60,
            open_span_days: 140,
            duration: DurationDist::default(),
            kinds: KindMix::default(),
            sum_over_window_share: 0.2,
            nominal_concentration: 1.0,
            n_forecasters: 100,
            activity_rate: 5.0,
            skill: SkillDist::default(),
            cohorts: vec![
                Cohort { name: "control".into(), share: 0.5, anchor_to_machine: 0.0 },
                Cohort { name: "hybrid".into(), share: 0.5, anchor_to_machine: 0.3 },
            ],
            series: SeriesParams::default(),
            machine: MachineParams::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_ifps == 0 {
            return fail("n_ifps must be positive");
        }
        if !(self.activity_rate > 0.0) {
            return fail("activity_rate must be positive");
        }
        if !(self.duration.mean > 0.0 && self.duration.sd > 0.0) || self.duration.min == 0 {
            return fail("duration parameters must be positive");
        }
        let k = &self.kinds;
        if [k.binary, k.ordinal, k.nominal].iter().any(|v| !(*v >= 0.0)) || k.binary + k.ordinal + k.nominal <= 0.0 {
            return fail("kind shares must be non-negative with a positive total");
        }
        if !(0.0..=1.0).contains(&self.sum_over_window_share) {
            return fail("sum_over_window_share must lie in [0, 1]");
        }
        if !(self.nominal_concentration > 0.0) {
            return fail("nominal_concentration must be positive");
        }
        let s = &self.series;
        if !(s.phi.abs() < 1.0) || !(s.noise_sd >= 0.0) || s.history_days < 30 {
            return fail("series needs |phi| < 1, noise_sd >= 0 and at least 30 history days");
        }
        let sk = &self.skill;
        for r in [sk.truth_weight, sk.noise_scale] {
            if !(r.low >= 0.0 && r.high >= r.low) {
                return fail("skill ranges need 0 <= low <= high");
            }
        }
        if self.n_forecasters > 0 {
            if self.cohorts.is_empty() || self.cohorts.iter().any(|c| !(c.share > 0.0)) {
                return fail("cohorts need positive shares");
            }
            if self.cohorts.iter().any(|c| !(0.0..=1.0).contains(&c.anchor_to_machine)) {
                return fail("anchor_to_machine must lie in [0, 1]");
            }
        }
        if self.machine.enabled && (self.machine.refit_every == 0 || self.machine.fit_window < 12) {
            return fail("machine needs refit_every >= 1 and fit_window >= 12");
        }
        Ok(())
    }
}
