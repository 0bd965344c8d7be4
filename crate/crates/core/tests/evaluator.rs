use ehaoi::evaluator::{evaluate_periodic_exact, Method};
use ehaoi::{
    evaluate_exact, modified_via, simulate, Action, Error, ModelParams, Policy, PolicyKind,
    SolverOptions,
};
use proptest::prelude::*;

#[test]
fn simulation_brackets_exact_zero_wait() {
    let m = ModelParams::reference();
    let exact = evaluate_exact(&PolicyKind::ZeroWait, &m).unwrap();
    // stationary battery alternates between 0 and 1 with equal mass
    assert!((exact.average_cost - (1.25 + 10.0 * 2.0 * 0.5)).abs() < 1e-10);
    let sim = simulate(&PolicyKind::ZeroWait, &m, 1_000_000, 42).unwrap();
    let ci = sim.ci_halfwidth.unwrap();
    assert!(ci.is_finite() && ci > 0.0);
    assert!((sim.average_cost - exact.average_cost).abs() <= 3.0 * ci);
    assert_eq!(sim.method, Method::Simulation);
}

#[test]
fn simulation_brackets_exact_periodic() {
    let m = ModelParams::new(0.3, 0.3, 10, 2.0, 10.0, 200).unwrap();
    let exact = evaluate_periodic_exact(5, false, &m).unwrap();
    let sim = simulate(&PolicyKind::periodic(5), &m, 1_000_000, 5).unwrap();
    assert!((sim.average_cost - exact.average_cost).abs() <= 3.0 * sim.ci_halfwidth.unwrap());

    let skip = PolicyKind::Periodic {
        period: 5,
        skip_on_empty: true,
    };
    let exact = evaluate_periodic_exact(5, true, &m).unwrap();
    assert_eq!(exact.reliable_energy_rate, 0.0);
    let sim = simulate(&skip, &m, 1_000_000, 5).unwrap();
    assert_eq!(sim.reliable_energy_rate, 0.0);
    assert!((sim.average_cost - exact.average_cost).abs() <= 3.0 * sim.ci_halfwidth.unwrap());
}

#[test]
fn truncation_bias_is_negligible_at_reference_point() {
    let m = ModelParams::reference();
    let mut wide = m;
    wide.delta_max = 400;
    let (_, tp) = modified_via(&m, &SolverOptions::default()).unwrap();
    let mut tp_wide = tp.clone();
    tp_wide.delta_max = 400;
    for (a, b) in [
        (PolicyKind::Optimal(tp), PolicyKind::Optimal(tp_wide)),
        (PolicyKind::ZeroWait, PolicyKind::ZeroWait),
    ] {
        let x = evaluate_exact(&a, &m).unwrap();
        let y = evaluate_exact(&b, &wide).unwrap();
        assert!((x.average_aoi - y.average_aoi).abs() < 1e-4);
    }
    let x = evaluate_periodic_exact(5, false, &m).unwrap();
    let y = evaluate_periodic_exact(5, false, &wide).unwrap();
    assert!((x.average_aoi - y.average_aoi).abs() < 1e-4);
}

#[test]
fn shape_mismatch_rejected() {
    let m = ModelParams::reference();
    let other = ModelParams::new(0.5, 0.2, 3, 2.0, 10.0, 10).unwrap();
    let p = Policy::constant(&other, Action::Transmit);
    assert_eq!(evaluate_exact(&PolicyKind::Explicit(p), &m), Err(Error::ShapeMismatch));
}

#[test]
fn zero_wait_with_certain_harvest_and_split_classes() {
    // Each battery level above zero is closed under zero-wait when every
    // slot harvests; only level 1 is reachable from the empty start.
    let m = ModelParams::new(1.0, 0.2, 20, 2.0, 10.0, 200).unwrap();
    let r = evaluate_exact(&PolicyKind::ZeroWait, &m).unwrap();
    assert!((r.average_aoi - 1.25).abs() < 1e-12);
    let sim = simulate(&PolicyKind::ZeroWait, &m, 200_000, 3).unwrap();
    assert!((sim.average_aoi - 1.25).abs() <= 3.0 * sim.ci_halfwidth.unwrap());
    // pays exactly once, in slot 0
    assert_eq!(sim.reliable_energy_rate, 1.0 / 200_000.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn accounting_identity(
        lambda_e in 0.05f64..1.0,
        p_block in 0.05f64..0.95,
        weight in 0.1f64..20.0,
        seed in any::<u64>(),
        period in 1u32..8,
    ) {
        let m = ModelParams::new(lambda_e, p_block, 4, 2.0, weight, 40).unwrap();
        for kind in [PolicyKind::ZeroWait, PolicyKind::periodic(period)] {
            let sim = simulate(&kind, &m, 5_000, seed).unwrap();
            let rebuilt = sim.average_aoi + m.reliable_penalty() * sim.reliable_energy_rate;
            prop_assert!((sim.average_cost - rebuilt).abs() <= 1e-9);
            let again = simulate(&kind, &m, 5_000, seed).unwrap();
            prop_assert_eq!(&sim, &again);
        }
        let exact = evaluate_periodic_exact(period, false, &m).unwrap();
        let rebuilt = exact.average_aoi + m.reliable_penalty() * exact.reliable_energy_rate;
        prop_assert!((exact.average_cost - rebuilt).abs() <= 1e-9);
    }
}
