use edgeuq::adaptation::{run_loop, EventKind, LoopConfig, LoopEvent};
use edgeuq::calibration::Confidence;
use edgeuq::dataset::SplitSpec;
use edgeuq::driftsim::{DriftKind, DriftScenario};
use edgeuq::metrics::OodRule;
use edgeuq::regressor::{Activation, RegressorSpec};

const SIGMA: f64 = 0.3;
const INITIAL: usize = 4000;
const ONSET: u64 = 6500;

fn config(windows: usize, max_cycles: usize) -> LoopConfig {
    LoopConfig {
        window: 500,
        windows,
        gamma: Confidence::new(0.9).unwrap(),
        coverage_tolerance: 0.1,
        ood_rate_threshold: 0.1,
        budget: 400,
        recency_weight: 0.5,
        pool_windows: 1,
        fine_tune_epochs: 50,
        fine_tune_learning_rate: 0.05,
        max_cycles,
        recalibration_size: 2000,
        split: SplitSpec { train: 0.5, calibration: 0.5, test: 0.0, seed: 11 },
        model: RegressorSpec::mlp(vec![16], Activation::Tanh)
            .with_training(0.05, 100, 32)
            .with_seed(7),
        bounds: None,
        ood: OodRule::default(),
        bisect_tol: 1e-9,
    }
}

fn sudden() -> DriftScenario {
    DriftScenario {
        kind: DriftKind::Sudden,
        magnitude: 5.0 * SIGMA,
        onset: ONSET,
        ..DriftScenario::stationary(SIGMA, 21)
    }
}

fn check_invariants(events: &[LoopEvent], cfg: &LoopConfig) {
    let floor = cfg.gamma.value() - cfg.coverage_tolerance;
    let mut live = 0;
    for (i, e) in events.iter().enumerate() {
        if i > 0 {
            assert!((events[i - 1].step, events[i - 1].seq) < (e.step, e.seq));
        }
        match &e.kind {
            EventKind::BreachDetected { picp, ood_rate, .. } => {
                assert!(*picp < floor || *ood_rate > cfg.ood_rate_threshold);
            }
            EventKind::WindowEvaluated { version, .. } => {
                assert!(*version >= live);
                live = *version;
            }
            EventKind::Redeployed { version, .. } => {
                let chain: Vec<&str> = events[i - 4..=i].iter().map(|e| e.kind.name()).collect();
                assert_eq!(chain, ["breach-detected", "curated", "fine-tuned", "recalibrated", "redeployed"]);
                for prior in &events[i - 3..i] {
                    match prior.kind {
                        EventKind::Curated { version: v, .. }
                        | EventKind::FineTuned { version: v, .. }
                        | EventKind::Recalibrated { version: v, .. } => assert_eq!(v, *version),
                        _ => unreachable!(),
                    }
                }
            }
            _ => {}
        }
    }
}

#[test]
fn stationary_stream_never_breaches() {
    let cfg = config(50, 3);
    let out = run_loop::<f64>(&DriftScenario::stationary(SIGMA, 21), INITIAL, &cfg).unwrap();
    check_invariants(&out.events, &cfg);
    assert_eq!(out.manifest.summary.windows, 50);
    assert_eq!(out.manifest.summary.breaches, 0);
    assert_eq!(out.registry.len(), 1);
}

#[test]
fn sudden_shift_breaches_then_recovers() {
    let cfg = config(12, 3);
    let out = run_loop::<f64>(&sudden(), INITIAL, &cfg).unwrap();
    check_invariants(&out.events, &cfg);

    let first_breach = out
        .events
        .iter()
        .find(|e| matches!(e.kind, EventKind::BreachDetected { .. }))
        .expect("a breach");
    assert!(first_breach.step > ONSET);
    assert!(first_breach.step <= ONSET + 3 * 500);

    let redeploys = out.events.iter().filter(|e| e.kind.name() == "redeployed").count();
    let handled = out
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::BreachDetected { handled: true, .. }))
        .count();
    assert_eq!(redeploys, handled);
    assert_eq!(out.registry.len(), redeploys + 1);

    let v1 = out.registry.get(1).unwrap();
    assert_eq!(v1.provenance.parent, Some(0));
    let after: Vec<f64> = out
        .events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::WindowEvaluated { version: 1, picp, .. } => Some(picp),
            _ => None,
        })
        .take(4)
        .collect();
    assert!(after.iter().any(|&p| p >= 0.8), "{after:?}");
}

#[test]
fn gradual_and_covariate_drift_run_cleanly() {
    let cfg = config(10, 2);
    for scenario in [
        DriftScenario {
            kind: DriftKind::Gradual,
            magnitude: 2.0,
            onset: 5000,
            duration: 2000,
            ..DriftScenario::stationary(SIGMA, 4)
        },
        DriftScenario {
            kind: DriftKind::Sudden,
            covariate_shift: 1.5,
            onset: 5000,
            ..DriftScenario::stationary(SIGMA, 4)
        },
    ] {
        let out = run_loop::<f64>(&scenario, INITIAL, &cfg).unwrap();
        check_invariants(&out.events, &cfg);
        assert!(out.registry.len() <= 3);
    }
}

#[test]
fn exhausted_cycle_budget_still_monitors() {
    let cfg = config(8, 0);
    let out = run_loop::<f64>(&sudden(), INITIAL, &cfg).unwrap();
    check_invariants(&out.events, &cfg);
    assert_eq!(out.registry.len(), 1);
    assert_eq!(out.manifest.summary.windows, 8);
    assert!(out
        .events
        .iter()
        .any(|e| matches!(e.kind, EventKind::BreachDetected { handled: false, .. })));
    assert!(out.events.iter().all(|e| e.kind.name() != "redeployed"));
}

#[test]
fn f32_loop_runs() {
    let cfg = config(6, 1);
    let out = run_loop::<f32>(&sudden(), INITIAL, &cfg).unwrap();
    check_invariants(&out.events, &cfg);
    assert_eq!(out.manifest.scalar, "f32");
}
