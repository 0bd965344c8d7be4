use ehaoi::model::{enumerate_states, one_step_cost, transition, Action, ModelParams, State};
use ehaoi::Simulator;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (0.01f64..=1.0, 0.01f64..0.99, 2u32..25, 0.0f64..5.0, 0.01f64..50.0, 2u32..60).prop_map(
        |(l, p, b, c, w, d)| ModelParams::new(l, p, b, c, w, d).unwrap(),
    )
}

fn params_and_state() -> impl Strategy<Value = (ModelParams, State)> {
    params().prop_flat_map(|m| {
        (Just(m), 1..=m.delta_max, 0..=m.battery_cap).prop_map(|(m, d, q)| (m, State::new(d, q)))
    })
}

proptest! {
    #[test]
    fn kernel_is_stochastic((m, s) in params_and_state(), transmit in any::<bool>()) {
        let a = Action::from(transmit);
        let d = transition(s, a, &m).unwrap();
        prop_assert!(d.len() <= 4 && !d.is_empty());
        prop_assert!((d.total() - 1.0).abs() <= 1e-12);
        for (i, &(t, p)) in d.iter().enumerate() {
            prop_assert!(p > 0.0 && p <= 1.0);
            prop_assert!(m.contains(t));
            prop_assert!(d.entries()[i + 1..].iter().all(|&(u, _)| u != t));
        }
    }

    #[test]
    fn kernel_support_matches_dynamics((m, s) in params_and_state(), transmit in any::<bool>()) {
        let a = Action::from(transmit);
        let d = transition(s, a, &m).unwrap();
        let aged = (s.aoi + 1).min(m.delta_max);
        match a {
            Action::Idle => {
                for &(t, _) in d.iter() {
                    prop_assert_eq!(t.aoi, aged);
                    prop_assert!(t.battery >= s.battery);
                }
            }
            Action::Transmit => {
                let reset: f64 = d.iter().filter(|(t, _)| t.aoi == 1).map(|&(_, p)| p).sum();
                if aged != 1 {
                    prop_assert!((reset - (1.0 - m.p_block)).abs() < 1e-12);
                }
                if s.battery > 0 {
                    prop_assert!(d.iter().all(|(t, _)| t.battery <= s.battery));
                }
            }
        }
        if s.aoi == m.delta_max {
            prop_assert!(d.iter().all(|(t, _)| t.aoi == 1 || t.aoi == m.delta_max));
        }
    }

    #[test]
    fn cost_increases_with_aoi((m, s) in params_and_state(), transmit in any::<bool>()) {
        prop_assume!(s.aoi < m.delta_max);
        let a = Action::from(transmit);
        let here = one_step_cost(s, a, &m).unwrap();
        let older = one_step_cost(State::new(s.aoi + 1, s.battery), a, &m).unwrap();
        prop_assert!(older > here);
        if s.battery > 0 {
            prop_assert_eq!(
                one_step_cost(s, Action::Idle, &m).unwrap(),
                one_step_cost(s, Action::Transmit, &m).unwrap()
            );
        }
    }

    #[test]
    fn enumeration_is_a_bijection(m in params()) {
        let states = enumerate_states(&m);
        prop_assert_eq!(states.len(), m.num_states());
        for (i, &s) in states.iter().enumerate() {
            prop_assert_eq!(m.index(s), i);
        }
    }
}

#[test]
fn every_state_action_pair_at_full_size_is_stochastic() {
    let m = ModelParams::reference();
    for s in enumerate_states(&m) {
        for a in Action::ALL {
            let d = transition(s, a, &m).unwrap();
            assert!((d.total() - 1.0).abs() <= 1e-12, "{s} {a:?}");
        }
    }
}

fn empirical(m: &ModelParams, s: State, a: Action, trials: u64, seed: u64) -> Vec<(State, u64)> {
    let mut sim = Simulator::new(*m, seed);
    let mut counts: Vec<(State, u64)> = Vec::new();
    for _ in 0..trials {
        sim.set_state(s);
        let r = sim.step(a);
        let t = State::new(r.next_state.aoi.min(m.delta_max), r.next_state.battery);
        match counts.iter_mut().find(|(u, _)| *u == t) {
            Some((_, c)) => *c += 1,
            None => counts.push((t, 1)),
        }
    }
    counts
}

#[test]
fn one_step_frequencies_within_three_sigma() {
    let m = ModelParams::reference();
    let trials = 1_000_000u64;
    for (s, a) in [
        (State::new(3, 0), Action::Transmit),
        (State::new(3, 7), Action::Transmit),
        (State::new(3, 2), Action::Idle),
        (State::new(200, 20), Action::Transmit),
    ] {
        let d = transition(s, a, &m).unwrap();
        let counts = empirical(&m, s, a, trials, 11);
        for &(t, _) in &counts {
            assert!(d.prob(t) > 0.0, "simulator reached {t} outside kernel support");
        }
        for &(t, p) in d.iter() {
            let seen = counts.iter().find(|(u, _)| *u == t).map_or(0, |&(_, c)| c) as f64;
            let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (seen - trials as f64 * p).abs() <= 3.0 * sigma,
                "{s} {a:?} -> {t}: {seen} vs {}",
                trials as f64 * p
            );
        }
    }
}

/// Upper 0.001 quantiles of the chi-square distribution, df = 1, 2, 3.
const CHI2_CRIT_001: [f64; 3] = [10.828, 13.816, 16.266];

#[test]
fn simulator_matches_kernel_by_chi_square() {
    let m = ModelParams::new(0.5, 0.2, 3, 2.0, 10.0, 8).unwrap();
    let samples = 100_000u64;
    for (k, s) in enumerate_states(&m).into_iter().enumerate() {
        for a in Action::ALL {
            let d = transition(s, a, &m).unwrap();
            if d.len() < 2 {
                continue;
            }
            let counts = empirical(&m, s, a, samples, 1000 + k as u64 * 2 + a.as_u8() as u64);
            let stat: f64 = d
                .iter()
                .map(|&(t, p)| {
                    let expected = samples as f64 * p;
                    let seen = counts.iter().find(|(u, _)| *u == t).map_or(0, |&(_, c)| c) as f64;
                    (seen - expected).powi(2) / expected
                })
                .sum();
            let crit = CHI2_CRIT_001[d.len() - 2];
            assert!(stat < crit, "{s} {a:?}: chi2 {stat:.2} >= {crit}");
        }
    }
}
