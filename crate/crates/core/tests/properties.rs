use hybrid_forecast::aggregation::{aggregate_standing, combine_with_machine, power_transform, recency_keep_count, AggregationConfig, SkillBook};
use hybrid_forecast::domain::{is_probability_vector, uniform_forecast, HorizonKind};
use hybrid_forecast::scoring::{brier_nominal, brier_ordinal, mdb, score_daily_from, standardize, DailyScore, StandardizeLevel};
use hybrid_forecast::tsmodels::{auto_arima, bin_probabilities, fit_arima, fit_random_walk, fit_ses, Series};
use hybrid_forecast::{Day, Fill, Forecast, Ifp, IfpKind, Source, Timestamp, TournamentLog};
use proptest::prelude::*;

fn probs(c: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, c).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn probs_with_outcome() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (2usize..=6).prop_flat_map(|c| (probs(c), 0..c))
}

fn ifp(c: usize, open: i32, close: i32) -> Ifp {
    Ifp {
        id: "q".into(),
        title: String::new(),
        options: (0..c).map(|i| format!("o{i}")).collect(),
        kind: if c == 2 { IfpKind::Binary } else { IfpKind::Ordinal },
        open_date: Day(open),
        close_date: Day(close),
        resolved_option: Some(0),
        series_ref: None,
        thresholds: None,
        horizon_kind: HorizonKind::ValueAtClose,
    }
}

fn forecast(user: &str, day: i32, ordinal: u32, probs: Vec<f64>) -> Forecast {
    Forecast { ifp_id: "q".into(), source: Source::human(user), probs, timestamp: Timestamp::new(Day(day), ordinal) }
}

/// One submission: (user, day, ordinal, probs).
type Sub = (u8, i32, u32, Vec<f64>);

/// Random single-IFP log: option count and submissions.
fn small_log() -> impl Strategy<Value = (usize, Vec<Sub>)> {
    (2usize..=4).prop_flat_map(|c| (Just(c), prop::collection::vec((0u8..8, 0i32..=15, 0u32..3, probs(c)), 1..25)))
}

fn build(c: usize, subs: &[Sub]) -> TournamentLog {
    let mut b = TournamentLog::builder();
    b.ifp(ifp(c, 0, 15)).unwrap();
    for (u, d, o, p) in subs {
        // Duplicate (user, timestamp) pairs are legal input; later rows win.
        let _ = b.forecast(forecast(&format!("u{u}"), *d, *o, p.clone()));
    }
    b.build()
}

proptest! {
    #[test]
    fn brier_stays_in_range((p, o) in probs_with_outcome()) {
        for b in [brier_nominal(&p, o).unwrap(), brier_ordinal(&p, o).unwrap()] {
            prop_assert!((0.0..=2.0).contains(&b));
        }
    }

    #[test]
    fn ordinal_brier_mirrors_under_reversal((p, o) in probs_with_outcome()) {
        let c = p.len();
        let rev: Vec<f64> = p.iter().rev().copied().collect();
        let a = brier_ordinal(&p, o).unwrap();
        let b = brier_ordinal(&rev, c - 1 - o).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn binary_ordinal_equals_nominal(p in probs(2), o in 0usize..2) {
        prop_assert!((brier_ordinal(&p, o).unwrap() - brier_nominal(&p, o).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn repeating_the_standing_forecast_changes_no_score(
        p in probs(3), q in probs(3), d1 in 0i32..5, d2 in 5i32..10, repeat in 0i32..15,
    ) {
        let q_ifp = ifp(3, 0, 14);
        let src = Source::human("a");
        let base = [forecast("a", d1, 0, p.clone()), forecast("a", d2, 0, q.clone())];
        let standing = if repeat >= d2 { q } else if repeat >= d1 { p } else { return Ok(()) };
        let mut more = base.to_vec();
        more.push(forecast("a", repeat, 1, standing));
        more.sort_by_key(|f| f.timestamp);
        let a = score_daily_from(&q_ifp, &src, &base.iter().collect::<Vec<_>>(), Fill::Uniform).unwrap();
        let b = score_daily_from(&q_ifp, &src, &more.iter().collect::<Vec<_>>(), Fill::Uniform).unwrap();
        prop_assert_eq!(&a, &b);
        let m = mdb(&a).unwrap();
        let mean = a.iter().map(|s| s.brier).sum::<f64>() / a.len() as f64;
        prop_assert!((m - mean).abs() <= 1e-12);
        prop_assert_eq!(a.len(), 15);
    }

    #[test]
    fn standardized_groups_have_unit_spread(values in prop::collection::vec(0.0f64..2.0, 2..40), day_split in 1usize..39) {
        let scores: Vec<DailyScore> = values
            .iter()
            .enumerate()
            .map(|(i, b)| DailyScore {
                ifp_id: "q".into(),
                source: Source::human(format!("u{i}")),
                day: Day(if i < day_split { 0 } else { 1 }),
                brier: *b,
            })
            .collect();
        let z = standardize(&scores, StandardizeLevel::IfpDay);
        for day in [0, 1] {
            let g: Vec<f64> = scores.iter().zip(&z).filter(|(s, _)| s.day == Day(day)).map(|(_, z)| *z).collect();
            let raw: Vec<f64> = scores.iter().filter(|s| s.day == Day(day)).map(|s| s.brier).collect();
            let spread = raw.iter().any(|b| (b - raw[0]).abs() > 1e-12);
            if g.len() < 2 || !spread {
                prop_assert!(g.iter().all(|z| *z == 0.0));
                continue;
            }
            let n = g.len() as f64;
            let mean = g.iter().sum::<f64>() / n;
            let sd = (g.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            prop_assert!(mean.abs() <= 1e-9 && (sd - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn power_transform_keeps_order(p in probs(5), a in 0.1f64..5.0) {
        let t = power_transform(&p, a);
        prop_assert!(is_probability_vector(&t));
        for i in 0..5 {
            for j in 0..5 {
                if p[i] < p[j] {
                    prop_assert!(t[i] <= t[j]);
                }
            }
        }
    }

    #[test]
    fn recency_keep_count_is_bounded(n in 0usize..500, f in 0.001f64..=1.0, floor in 0usize..20) {
        let k = recency_keep_count(n, f, floor);
        prop_assert!(k <= n);
        prop_assert!(k >= floor.min(n));
        prop_assert!(n == 0 || k >= 1);
    }

    #[test]
    fn pipeline_emits_probability_vectors((c, subs) in small_log(), day in 0i32..=15) {
        let log = build(c, &subs);
        let standing: Vec<&Forecast> = log
            .by_source("q")
            .into_values()
            .filter_map(|v| v.into_iter().rfind(|f| f.timestamp.day <= Day(day)))
            .collect();
        prop_assert!(standing.iter().all(|f| f.timestamp.day <= Day(day)));
        let cfg = AggregationConfig::default();
        let a = aggregate_standing(&standing, Day(day), &cfg, &SkillBook::default(), 0.5);
        let b = aggregate_standing(&standing, Day(day), &cfg, &SkillBook::default(), 0.5);
        prop_assert_eq!(&a, &b);
        if let Some(h) = a {
            prop_assert!(is_probability_vector(&h.probs));
            let m = uniform_forecast(c).unwrap();
            let out = combine_with_machine(Some(&h), Some(&m), true, &cfg).unwrap();
            prop_assert!(is_probability_vector(&out));
        }
    }

    #[test]
    fn combination_moves_towards_machine(h in probs(3), m in probs(3), k1 in 0.0f64..50.0, dk in 0.0f64..50.0) {
        let human = hybrid_forecast::aggregation::HumanAggregate { probs: h, total_weight: 3.0, n_kept: 3 };
        let tv = |k: f64| {
            let mut cfg = AggregationConfig::default();
            cfg.machine_equivalents.other = k;
            let out = combine_with_machine(Some(&human), Some(&m), false, &cfg).unwrap();
            out.iter().zip(&m).map(|(a, b)| (a - b).abs()).sum::<f64>()
        };
        prop_assert!(tv(k1 + dk) <= tv(k1) + 1e-12);
    }

    #[test]
    fn bin_mass_above_threshold_grows_with_mean(m in -5.0f64..5.0, dm in 0.0f64..3.0, var in 0.01f64..10.0) {
        let th = [-1.0, 0.5, 2.0];
        let lo = bin_probabilities(m, var, &th).unwrap();
        let hi = bin_probabilities(m + dm, var, &th).unwrap();
        for j in 1..=th.len() {
            let above = |p: &[f64]| p[j..].iter().sum::<f64>();
            prop_assert!(above(&hi) >= above(&lo) - 1e-12);
        }
    }
}

fn noisy_series(seed: u64, n: usize) -> Series {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let e = Normal::new(0.0, 1.0).unwrap();
    let mut level = 0.0;
    let v: Vec<f64> = (0..n)
        .map(|_| {
            level += 0.3 * e.sample(&mut r);
            level + e.sample(&mut r)
        })
        .collect();
    Series::from_values("s", Day(0), &v).unwrap()
}

#[test]
fn variance_grows_with_horizon_for_random_walk_and_ses() {
    for seed in 0..5 {
        let s = noisy_series(seed, 80);
        for model in [fit_random_walk(&s).unwrap(), fit_ses(&s).unwrap()] {
            let f = model.forecast(30);
            assert!(f.windows(2).all(|w| w[1].variance >= w[0].variance));
            assert!(model.residual_variance >= 0.0);
        }
    }
}

#[test]
fn auto_arima_picks_minimum_aic() {
    for seed in 0..3 {
        let s = noisy_series(100 + seed, 60);
        let best = auto_arima(&s).unwrap();
        for p in 0..=3 {
            for d in 0..=2 {
                for q in 0..=3 {
                    if let Ok(m) = fit_arima(&s, p, d, q) {
                        assert!(best.aic <= m.aic, "({p},{d},{q}) beat the selection");
                    }
                }
            }
        }
    }
}

#[test]
fn standing_forecasts_never_come_from_the_future() {
    let log = build(3, &[(0, 3, 0, vec![0.2, 0.3, 0.5]), (0, 9, 0, vec![0.6, 0.2, 0.2]), (1, 12, 0, vec![0.1, 0.1, 0.8])]);
    let q = log.ifp("q").unwrap();
    for day in q.active_days() {
        for (src, own) in log.by_source("q") {
            let scored = score_daily_from(q, src, &own, Fill::Uniform).unwrap();
            assert_eq!(scored.len(), q.active_len());
            assert_eq!(scored.len() as i32, q.close_date.since(q.open_date) + 1);
            assert!(scored.iter().any(|s| s.day == day));
        }
    }
}
