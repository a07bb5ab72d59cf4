use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::config::{Range, SimConfig};
use super::world::{stream, World, STREAM_FORECASTER};
use crate::aggregation::power_transform;
use crate::domain::{Day, Forecast, Source, Timestamp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecasterProfile {
    pub id: String,
    pub cohort: String,
    pub anchor_to_machine: f64,
    pub truth_weight: f64,
    pub noise_scale: f64,
}

fn draw(range: Range, rng: &mut ChaCha8Rng) -> f64 {
    range.low + (range.high - range.low) * rng.random::<f64>()
}

/// Cohort membership is assigned by position so cohort sizes follow the
/// configured shares exactly; skill is drawn from the forecaster's stream.
pub fn forecaster_profile(cfg: &SimConfig, index: usize, rng: &mut ChaCha8Rng) -> ForecasterProfile {
    let total: f64 = cfg.cohorts.iter().map(|c| c.share).sum();
    let pos = (index as f64 + 0.5) / cfg.n_forecasters as f64 * total;
    let mut cum = 0.0;
    let mut cohort = cfg.cohorts.last().unwrap();
    for c in &cfg.cohorts {
        cum += c.share;
        if pos < cum {
            cohort = c;
            break;
        }
    }
    ForecasterProfile {
        id: format!("u{index:04}"),
        cohort: cohort.name.clone(),
        anchor_to_machine: cohort.anchor_to_machine,
        truth_weight: draw(cfg.skill.truth_weight, rng),
        noise_scale: draw(cfg.skill.noise_scale, rng),
    }
}

/// One human probability vector: the true posterior tempered by the
/// forecaster's truth weight, perturbed by log-odds noise, then blended with
/// the visible machine forecast by the anchoring weight.
pub fn gen_human_forecast(
    profile: &ForecasterProfile,
    truth: &[f64],
    machine: Option<&[f64]>,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let base = power_transform(truth, profile.truth_weight);
    let sd = profile.noise_scale / std::f64::consts::SQRT_2;
    let noise = Normal::new(0.0, sd.max(0.0)).unwrap();
    let logits: Vec<f64> = base
        .iter()
        .map(|p| {
            let e: f64 = noise.sample(rng);
            p.ln() + e
        })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let human: Vec<f64> = exps.iter().map(|e| e / total).collect();
    let a = profile.anchor_to_machine;
    match machine {
        Some(m) if a > 0.0 => human.iter().zip(m).map(|(h, m)| (1.0 - a) * h + a * m).collect(),
        _ => human,
    }
}

/// Machine forecasts on one question, in day order.
pub(crate) type MachineTrack = Vec<(Day, Vec<f64>)>;

pub(crate) fn standing_machine(track: &MachineTrack, day: Day) -> Option<&[f64]> {
    let n = track.partition_point(|(d, _)| *d <= day);
    n.checked_sub(1).map(|i| track[i].1.as_slice())
}

/// Every forecast of one forecaster over the season. Each week the number
/// of forecasts is Poisson; each lands on a uniform day of that week and a
/// uniformly chosen question open on that day.
pub(crate) fn forecaster_stream(
    cfg: &SimConfig,
    index: usize,
    world: &World,
    open_by_day: &[Vec<usize>],
    machine: &[MachineTrack],
) -> (ForecasterProfile, Vec<Forecast>) {
    let mut rng = stream(cfg.seed, STREAM_FORECASTER, index as u64);
    let profile = forecaster_profile(cfg, index, &mut rng);
    let source = Source::human(profile.id.clone());
    let (first, _) = world.calendar();
    let poisson = Poisson::new(cfg.activity_rate).unwrap();
    let mut out = Vec::new();
    let n_days = open_by_day.len();
    for week_start in (0..n_days).step_by(7) {
        let n = poisson.sample(&mut rng) as usize;
        for ordinal in 0..n {
            let offset = week_start + rng.random_range(0..7usize);
            let pick = rng.random::<f64>();
            let Some(open) = open_by_day.get(offset).filter(|o| !o.is_empty()) else { continue };
            let q = open[((pick * open.len() as f64) as usize).min(open.len() - 1)];
            let day = first.offset(offset as i32);
            let sim = &world.ifps[q];
            let truth = sim.truth_on(day).expect("question open on day");
            let probs = gen_human_forecast(&profile, truth, standing_machine(&machine[q], day), &mut rng);
            out.push(Forecast {
                ifp_id: sim.ifp.id.clone(),
                source: source.clone(),
                probs,
                timestamp: Timestamp::new(day, ordinal as u32),
            });
        }
    }
    (profile, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::is_probability_vector;

    fn profile(anchor: f64, tw: f64, noise: f64) -> ForecasterProfile {
        ForecasterProfile {
            id: "u".into(),
            cohort: "c".into(),
            anchor_to_machine: anchor,
            truth_weight: tw,
            noise_scale: noise,
        }
    }

    #[test]
    fn full_anchor_copies_machine() {
        let m = [0.2, 0.3, 0.5];
        let mut rng = stream(0, 0, 0);
        let p = gen_human_forecast(&profile(1.0, 0.7, 1.0), &[0.6, 0.3, 0.1], Some(&m), &mut rng);
        assert_eq!(p, m.to_vec());
    }

    #[test]
    fn zero_anchor_ignores_machine() {
        let prof = profile(0.0, 0.7, 1.0);
        let truth = [0.6, 0.3, 0.1];
        let a = gen_human_forecast(&prof, &truth, Some(&[0.2, 0.3, 0.5]), &mut stream(3, 0, 0));
        let b = gen_human_forecast(&prof, &truth, None, &mut stream(3, 0, 0));
        assert_eq!(a, b);
        assert!(is_probability_vector(&a));
    }

    #[test]
    fn noiseless_full_weight_returns_truth() {
        let truth = [0.6, 0.3, 0.1];
        let p = gen_human_forecast(&profile(0.0, 1.0, 0.0), &truth, None, &mut stream(0, 0, 0));
        for (a, b) in p.iter().zip(truth) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cohorts_follow_shares() {
        let cfg = SimConfig { n_forecasters: 10, ..SimConfig::default() };
        let mut rng = stream(0, 0, 0);
        let names: Vec<String> = (0..10).map(|i| forecaster_profile(&cfg, i, &mut rng).cohort).collect();
        assert_eq!(names.iter().filter(|n| *n == "control").count(), 5);
    }
}
