use std::sync::Arc;

use martlab_core::error::Error;
use martlab_core::generators::{gen_doubling, gen_dyadic_of_function, gen_scaled_walk, gen_walk, GeneratorSpec};
use martlab_core::ops::functionals::square_function;
use martlab_core::process::TreeProcess;
use martlab_core::registry::{run_check, run_check_with, CheckConfig, CheckReport, FileCorpus};
use martlab_core::tree::FiltrationTree;

fn strip(mut r: CheckReport) -> String {
    r.runtime_ms = 0;
    serde_json::to_string(&r).unwrap()
}

#[test]
fn reports_are_deterministic() {
    for name in ["doob", "garsia_neveu", "lepingle", "paraproduct", "weighted_doob"] {
        let cfg = CheckConfig::new(name, 7).trials(20).depth(4);
        assert_eq!(strip(run_check(&cfg).unwrap()), strip(run_check(&cfg).unwrap()), "{name}");
    }
}

#[test]
fn different_seeds_draw_different_corpora() {
    let a = run_check(&CheckConfig::new("doob", 1).trials(50)).unwrap();
    let b = run_check(&CheckConfig::new("doob", 2).trials(50)).unwrap();
    assert_ne!(a.measurements, b.measurements);
}

#[test]
fn report_json_round_trip() {
    let rep = run_check(&CheckConfig::new("davis_bdg", 3).trials(30)).unwrap();
    let s = serde_json::to_string(&rep).unwrap();
    let back: CheckReport = serde_json::from_str(&s).unwrap();
    assert_eq!(back, rep);
}

#[test]
fn invalid_parameters_are_rejected() {
    let bad = [
        CheckConfig::new("doob", 0).param("p", 0.5),
        CheckConfig::new("lepingle", 0).param("r", 2.0),
        CheckConfig::new("good_lambda", 0).param("p", 4.0),
        CheckConfig::new("truncation", 0).param("p", 1.5),
        CheckConfig::new("vector_valued", 0).param("k", 100),
        CheckConfig::new("doob", 0).param("p", "two"),
    ];
    for cfg in bad {
        assert!(matches!(run_check(&cfg), Err(Error::InvalidParameter(_))), "{cfg:?}");
    }
}

#[test]
fn broken_martingale_in_file_corpus_is_a_violation() {
    let good = gen_walk(3, 1.0).unwrap().into_process();
    let t = good.tree().clone();
    let mut vals = good.values().to_vec();
    vals[3] += 0.5;
    let broken = TreeProcess::new(t, vals).unwrap();
    let corpus = FileCorpus { processes: vec![good, broken] };
    let rep = run_check_with(&CheckConfig::new("doob", 0), Some(&corpus)).unwrap();
    assert_eq!(rep.trials, 2);
    assert_eq!(rep.violations, 1);
    assert_eq!(rep.measurement("not_martingale"), Some(1.0));
    assert!(run_check_with(&CheckConfig::new("layer_cake", 0), Some(&corpus)).is_err());
}

#[test]
fn generator_override() {
    let mut cfg = CheckConfig::new("doob", 0).trials(5);
    cfg.corpus = Some(GeneratorSpec::Doubling { depth: 6 });
    let rep = run_check(&cfg).unwrap();
    assert!(rep.passed());
    assert_eq!(rep.params["corpus"]["generator"], "doubling");
}

#[test]
fn doubling_has_unit_mean() {
    let f = gen_doubling(3).unwrap();
    for n in 0..=3 {
        assert!((f.expectation(n) - 1.0).abs() < 1e-15);
    }
}

#[test]
fn scaled_walk_square_function() {
    let f = gen_scaled_walk(4).unwrap();
    assert!(square_function(&f).leaf_values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
}

#[test]
fn dyadic_identity_midpoints() {
    let f = gen_dyadic_of_function(|x| x, 2).unwrap();
    for (a, b) in f.at_level(2).iter().zip([0.125, 0.375, 0.625, 0.875]) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn constant_martingale_passes_every_corpus_check() {
    let t = Arc::new(FiltrationTree::uniform(2, 3).unwrap());
    let corpus = FileCorpus { processes: vec![TreeProcess::constant(t, 2.0)] };
    for name in ["doob", "square_weak", "davis_decomposition", "sharp_davis", "pathwise_sharp", "lepingle", "optional_sampling"] {
        let rep = run_check_with(&CheckConfig::new(name, 0), Some(&corpus)).unwrap();
        assert!(rep.passed(), "{name}: {rep:?}");
    }
}

#[test]
fn lepingle_sweep_towards_two_stays_bounded() {
    let cfg = CheckConfig::new("lepingle", 5).trials(50).depth(8).param("r", vec![2.5, 2.25, 2.1]);
    let rep = run_check(&cfg).unwrap();
    assert!(rep.passed());
    for r in ["2.5", "2.25", "2.1"] {
        let v = rep.measurement(&format!("moment_ratio_r{r}")).unwrap();
        assert!(v.is_finite() && v < 1.0, "{r}: {v}");
    }
}

#[test]
fn paraproduct_exponent_grid() {
    for (q0, q1, r1) in [(2.0, 2.0, 2.0), (2.0, 4.0, 4.0), (4.0, 4.0, 8.0), (1.5, 3.0, 3.0)] {
        let cfg = CheckConfig::new("paraproduct", 11).trials(100).depth(5).param("q0", q0).param("q1", q1).param("r1", r1);
        let rep = run_check(&cfg).unwrap();
        assert!(rep.passed(), "{q0} {q1} {r1}");
        for (k, v) in &rep.measurements {
            assert!(v.0.is_finite(), "{k}");
        }
    }
}

#[test]
fn vector_valued_fubini_case() {
    let cfg = CheckConfig::new("vector_valued", 2).trials(200).param("q", 2.0).param("r", 2.0).param("p", 2.0);
    let rep = run_check(&cfg).unwrap();
    assert!(rep.passed());
    assert!(rep.measurement("lr_bdg_ratio").unwrap() <= 2.0);
}
