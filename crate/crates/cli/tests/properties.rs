use martlab_cli::suite::{Overrides, SuiteConfig, SuiteEntry};
use proptest::prelude::*;

fn entry() -> impl Strategy<Value = SuiteEntry> {
    (
        prop::sample::select(vec!["doob", "lepingle", "ito_bound", "rde", "bellman"]),
        prop::option::of(1usize..1000),
        prop::option::of(1usize..9),
        prop::option::of(any::<u64>()),
        prop::option::of(0.0f64..1e-3),
    )
        .prop_map(|(c, trials, depth, seed, tol)| {
            let mut e = SuiteEntry::new(c);
            e.trials = trials;
            e.depth = depth;
            e.seed = seed;
            e.tol = tol;
            e
        })
}

fn overrides() -> impl Strategy<Value = Overrides> {
    (
        prop::option::of(any::<u64>()),
        prop::option::of(1usize..1000),
        prop::option::of(1usize..9),
        prop::option::of(0.0f64..1e-3),
    )
        .prop_map(|(seed, trials, depth, tol)| Overrides { seed, trials, depth, tol, out: None })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn config_json_round_trips(checks in prop::collection::vec(entry(), 1..6), seed in prop::option::of(any::<u64>())) {
        let c = SuiteConfig { seed, checks, ..Default::default() };
        let s = serde_json::to_string(&c).unwrap();
        prop_assert_eq!(serde_json::from_str::<SuiteConfig>(&s).unwrap(), c);
    }

    #[test]
    fn set_flags_always_win(checks in prop::collection::vec(entry(), 1..6), seed in any::<u64>(), o in overrides()) {
        let c = SuiteConfig { seed: Some(seed), checks: checks.clone(), ..Default::default() };
        let r = c.resolve(&o).unwrap();
        prop_assert_eq!(r.entries.len(), checks.len());
        for ((cfg, _), e) in r.entries.iter().zip(&checks) {
            prop_assert_eq!(cfg.seed, o.seed.or(e.seed).unwrap_or(seed));
            prop_assert_eq!(cfg.trials, o.trials.or(e.trials));
            prop_assert_eq!(cfg.depth, o.depth.or(e.depth));
            prop_assert_eq!(cfg.tol, o.tol.or(e.tol));
        }
    }
}
