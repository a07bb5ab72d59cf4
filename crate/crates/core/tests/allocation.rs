use std::collections::BTreeSet;

use hybrid_forecast::allocation::{apply_policy, AllocationPolicy, PolicyKind};
use hybrid_forecast::simulator::{default_slots, simulate, SimConfig};
use hybrid_forecast::{Exec, Forecast, TournamentLog};

fn log(seed: u64) -> TournamentLog {
    simulate(&SimConfig { seed, n_ifps: 30, n_forecasters: 60, ..SimConfig::default() }, Exec::Parallel).unwrap().log
}

fn key(f: &Forecast) -> (String, String, i32, u32) {
    (f.ifp_id.clone(), f.source.id().to_string(), f.timestamp.day.0, f.timestamp.ordinal)
}

#[test]
fn random_policy_keeps_its_share() {
    let slot = &default_slots()[0];
    let mut budgets = Vec::new();
    for seed in 0..5 {
        let l = log(seed);
        let a = apply_policy(&l, &AllocationPolicy::new("r", PolicyKind::Random { p_keep: 0.62 }), slot, seed, Exec::Parallel).unwrap();
        budgets.push(a.report.budget);
    }
    let mean = budgets.iter().sum::<f64>() / budgets.len() as f64;
    assert!((mean - 62.0).abs() <= 2.0, "{budgets:?}");
}

#[test]
fn censored_logs_are_subsets_with_exact_budget() {
    let l = log(11);
    let original: BTreeSet<_> = l.forecasts().iter().map(key).collect();
    let slot = &default_slots()[0];
    let kinds = [
        PolicyKind::All,
        PolicyKind::Random { p_keep: 0.5 },
        PolicyKind::GreedyIfp { exclude_frac: 0.1 },
        PolicyKind::GreedyIfpPp { exclude_frac: 0.1, cap: 10 },
    ];
    for kind in kinds {
        let a = apply_policy(&l, &AllocationPolicy::new("p", kind.clone()), slot, 3, Exec::Parallel).unwrap();
        assert!(a.log.forecasts().iter().all(|f| original.contains(&key(f))), "{kind:?}");
        let r = &a.report;
        assert_eq!(r.budget, 100.0 * r.kept as f64 / r.total as f64);
        assert!(r.budget > 0.0 && r.budget <= 100.0);
        assert_eq!(r.excluded_users, a.excluded.len());
        // An excluded user forecasts nothing after the batch that removed them.
        for f in a.log.forecasts() {
            if let Some(day) = a.excluded.get(f.source.id()) {
                assert!(f.timestamp.day <= *day, "{kind:?}: {} after {:?}", f.source.id(), day);
            }
        }
    }
}

#[test]
fn policies_are_deterministic_across_modes() {
    let l = log(5);
    let slot = &default_slots()[0];
    let p = AllocationPolicy::new("g", PolicyKind::GreedyIfpPp { exclude_frac: 0.04, cap: 20 });
    let a = apply_policy(&l, &p, slot, 9, Exec::Parallel).unwrap();
    let b = apply_policy(&l, &p, slot, 9, Exec::Sequential).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.report, b.report);
}

#[test]
fn invalid_policies_are_rejected() {
    let l = log(1);
    let slot = &default_slots()[0];
    for kind in [
        PolicyKind::Random { p_keep: 0.0 },
        PolicyKind::GreedyIfp { exclude_frac: 1.0 },
        PolicyKind::GreedyIfpPp { exclude_frac: 0.1, cap: 0 },
    ] {
        assert!(apply_policy(&l, &AllocationPolicy::new("bad", kind), slot, 0, Exec::Sequential).is_err());
    }
}
