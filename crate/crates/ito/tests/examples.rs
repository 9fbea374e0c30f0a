use martlab_core::registry::CheckConfig;
use martlab_core::rng;
use martlab_ito::check::{identity_residuals, random_instance, run_check, walk_demo, CONDITIONAL_TOL, IDENTITY_TOL};
use martlab_ito::io::{read_partition_trace, read_path, write_partition_trace, write_path};
use martlab_ito::sums::{chen_residual, coarsening_residual, isometry_residual, parts_residual};
use martlab_ito::*;

#[test]
fn walk_integral_matches_brute_force_and_discrete_ito_formula() {
    let space = SampleSpace::uniform(2, 128, 1.0, 64, 9).unwrap();
    let g = GridCadlagPath::scaled_walk(space.clone()).unwrap();
    let full = AdaptedGridPartition::full(space);
    let sums = ito_sum(&g, &g, &full, 0, 128).unwrap();
    for (p, s) in sums.iter().enumerate() {
        let x = g.path(p);
        // Double loop straight from the definition.
        let mut brute = 0.0;
        for j in 1..128 {
            let mut df = 0.0;
            for v in 0..j {
                df += x[v + 1] - x[v];
            }
            brute += df * (x[j + 1] - x[j]);
        }
        assert!((s - brute).abs() < 1e-12);
        // Σ g_v δg_v = (g_T² − Σ (δg)²) / 2 with Σ (δg)² = 1.
        assert!((s - 0.5 * (x[128] * x[128] - 1.0)).abs() < 1e-12);
    }
}

#[test]
fn scaled_walk_covariation_is_one() {
    let d = walk_demo(256, 128, 0.5, 1).unwrap();
    assert!(d.g.space().enumeration().is_sampled());
    let full = AdaptedGridPartition::full(d.g.space().clone());
    for c in covariation_sum(&d.g, &d.g, &full, 0, 256).unwrap() {
        assert_eq!(c, 1.0);
    }
    // Coarser partitions need not give 1, but containing 0 and T the mean is.
    let cov = covariation_sum(&d.g, &d.g, &d.pi, 0, 256).unwrap();
    assert!(cov.iter().all(|c| c.is_finite()));
}

#[test]
fn ramp_covariation() {
    let space = SampleSpace::deterministic(32, 2.0).unwrap();
    let h = 0.3;
    let f = GridCadlagPath::from_recursion(space.clone(), 0.0, |_, x, _| x + h);
    let c = covariation_sum(&f, &f, &AdaptedGridPartition::full(space), 0, 32).unwrap();
    assert!((c[0] - 32.0 * h * h).abs() < 1e-12);
}

#[test]
fn exact_identities_on_sampled_walks() {
    let space = SampleSpace::sampled(2, 48, 1.0, 24, 5).unwrap();
    let g = GridCadlagPath::scaled_walk(space.clone()).unwrap();
    let f = g.adapted_map(|x| x.iter().sum::<f64>() / x.len() as f64);
    let pi = AdaptedGridPartition::oscillation(&f, 0.2).unwrap();
    let tau = pi.union(&AdaptedGridPartition::oscillation(&g, 0.3).unwrap()).unwrap().refine(2);
    assert!(coarsening_residual(&f, &g, &pi, &tau).unwrap() <= 1e-12);
    assert!(chen_residual(&f, &g, &pi).unwrap() <= 1e-12);
    assert!(parts_residual(&f, &g, &pi).unwrap() <= 1e-12);
    assert!(parts_residual(&g, &f, &tau).unwrap() <= 1e-12);
    assert!(coarsening_residual(&f, &g, &tau, &pi).is_err());
}

#[test]
fn discretization_extremes() {
    let space = SampleSpace::uniform(2, 6, 1.0, 1, 0).unwrap();
    let g = GridCadlagPath::scaled_walk(space.clone()).unwrap();
    assert_eq!(discretize(&g, &AdaptedGridPartition::full(space.clone())).unwrap(), g);
    let c = discretize(&g, &AdaptedGridPartition::trivial(space.clone())).unwrap();
    assert!(c.paths().all(|x| x.iter().all(|&v| v == 0.0)));
    // A partition built from the walk itself keeps the discretised walk adapted.
    let pi = AdaptedGridPartition::oscillation(&g, 0.7).unwrap();
    let d = discretize(&g, &pi).unwrap();
    assert_eq!(d.is_martingale(), Some(false));
}

#[test]
fn random_tree_instances() {
    for i in 0..20 {
        let mut r = rng::stream(77, i);
        let inst = random_instance(4, &mut r).unwrap();
        let res = identity_residuals(&inst, &mut r).unwrap();
        assert!(res.max_exact() <= IDENTITY_TOL, "{res:?}");
        assert!(res.max_conditional() <= CONDITIONAL_TOL, "{res:?}");
    }
}

#[test]
fn isometry_needs_partition_points() {
    let space = SampleSpace::uniform(2, 6, 1.0, 1, 0).unwrap();
    let g = GridCadlagPath::scaled_walk(space.clone()).unwrap();
    let pi = AdaptedGridPartition::oscillation(&g, 0.5).unwrap().union(&AdaptedGridPartition::deterministic(space, &[2, 5]).unwrap()).unwrap();
    assert!(isometry_residual(&g, &pi, 2, 5).unwrap() <= 1e-12);
    assert!(isometry_residual(&g, &pi, 1, 5).is_err());
}

#[test]
fn refinement_demo_is_cauchy() {
    let d = walk_demo(256, 256, 0.5, 11).unwrap();
    let cfg = RefineConfig { start_level: 4, ..Default::default() };
    let res = refine_converge(&d.g, &d.g, &d.pi, &cfg).unwrap();
    assert!(res.enumeration.is_sampled());
    assert_eq!(res.distances().len(), 4);
    assert!(res.cauchy(), "{res:?}");
    // The last level is the full grid, so the discretisation error vanishes.
    assert_eq!(res.levels.last().unwrap().discretization_error, 0.0);
    // Coarse starting levels are pre-asymptotic: reported, not raised.
    let early = refine_converge(&d.g, &d.g, &d.pi, &RefineConfig::default()).unwrap();
    assert!(!early.distances_nonincreasing);
}

#[test]
fn registry_style_checks_pass() {
    for (name, trials) in [("ito_bound", 40), ("ito_identities", 40), ("ito_refinement", 0)] {
        let mut cfg = CheckConfig::new(name, 3);
        if trials > 0 {
            cfg = cfg.trials(trials);
        } else {
            cfg = cfg.param("paths", 128);
        }
        let rep = run_check(&cfg).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.trials > 0);
    }
    let rep = run_check(&CheckConfig::new("ito_bound", 3).trials(40)).unwrap();
    let ratio = rep.measurement("bound_ratio").unwrap();
    assert!(ratio > 0.0 && ratio.is_finite());
}

#[test]
fn csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = walk_demo(32, 8, 0.4, 2).unwrap();
    let pp = dir.path().join("path.csv");
    let tp = dir.path().join("trace.csv");
    write_path(&d.g, 3, std::fs::File::create(&pp).unwrap()).unwrap();
    write_partition_trace(&d.pi, std::fs::File::create(&tp).unwrap()).unwrap();
    assert_eq!(read_path(std::fs::File::open(&pp).unwrap()).unwrap().path(0), d.g.path(3));
    assert_eq!(read_partition_trace(d.g.space().clone(), std::fs::File::open(&tp).unwrap()).unwrap(), d.pi);
}
