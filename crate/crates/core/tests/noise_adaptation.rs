use num_rational::Ratio;
use orthoqkd::analysis::{expected_ledger, noise_rate_table};
use orthoqkd::codebook::{Codebook, NoiseMode, Protocol};
use orthoqkd::engine::{run, ProtocolConfig};
use orthoqkd::noise::{adapt_protocol, noisy_modes, parameter_grid, AngleSchedule, Grouping};
use orthoqkd::{AttackKind, AttackStrategy};

fn none() -> AttackStrategy {
    AttackStrategy::new(AttackKind::NoAttack)
}

#[test]
fn matched_modes_are_error_free_on_grids() {
    for protocol in [Protocol::One, Protocol::Two] {
        for mode in noisy_modes() {
            for (k, point) in parameter_grid(mode).into_iter().enumerate() {
                let cfg = ProtocolConfig::new(protocol, 20)
                    .with_noise(point)
                    .with_seed(k as u64);
                let (r, _) = run(&cfg, &mut none()).unwrap();
                assert_eq!(
                    (r.checking.errors, r.decoy.errors, r.discarded),
                    (0, 0, 0),
                    "{protocol} {point}"
                );
                assert!(!r.aborted);
                assert_eq!(r.key_bits, r.alice_key_bits);
            }
        }
    }
}

#[test]
fn random_angles_per_run_are_also_corrected() {
    for protocol in [Protocol::One, Protocol::Two] {
        for mode in [
            NoiseMode::CollectiveDephasing { phi: None },
            NoiseMode::CollectiveRotation { theta: None },
        ] {
            for seed in 0..10 {
                let cfg = ProtocolConfig::new(protocol, 20)
                    .with_noise(mode)
                    .with_seed(seed);
                let (r, t) = run(&cfg, &mut none()).unwrap();
                assert!(t.channel_angle.is_some());
                assert_eq!(r.checking.errors + r.decoy.errors, 0);
            }
        }
    }
}

#[test]
fn rotation_breaks_unadapted_protocol() {
    let mut errors = 0;
    for protocol in [Protocol::One, Protocol::Two] {
        let mut cfg = ProtocolConfig::new(protocol, 100)
            .with_noise(NoiseMode::CollectiveRotation { theta: Some(0.6) })
            .with_threshold(1.0);
        cfg.adapt_to_noise = false;
        let (r, _) = run(&cfg, &mut none()).unwrap();
        assert!(r.checking.errors > 0, "{protocol}");
        errors += r.checking.errors;
    }
    assert!(errors > 20);
}

#[test]
fn stage_wise_angles_break_protocol_one() {
    let mut cfg = ProtocolConfig::new(Protocol::One, 100)
        .with_noise(NoiseMode::CollectiveRotation { theta: None })
        .with_threshold(1.0)
        .with_seed(4);
    cfg.angle_schedule = AngleSchedule::PerStage;
    let (r, _) = run(&cfg, &mut none()).unwrap();
    assert!(r.checking.errors > 0);
}

#[test]
fn independent_damping_discards_some_states() {
    for protocol in [Protocol::One, Protocol::Two] {
        for mode in [
            NoiseMode::AmplitudeDamping { p: 0.5 },
            NoiseMode::PhaseDamping { p: 0.5 },
        ] {
            let mut cfg = ProtocolConfig::new(protocol, 100)
                .with_noise(mode)
                .with_threshold(1.0);
            cfg.grouping = Grouping::Independent;
            let (r, t) = run(&cfg, &mut none()).unwrap();
            if matches!(mode, NoiseMode::AmplitudeDamping { .. }) {
                assert!(r.discarded > 0, "{protocol} {mode}");
            }
            assert_eq!(r.discarded, t.discarded.len());
            for d in &t.discarded {
                assert!(!t.checking_set.contains(d));
            }
        }
    }
}

#[test]
fn noisy_ledgers_follow_adapted_codebooks() {
    for protocol in [Protocol::One, Protocol::Two] {
        for mode in noisy_modes() {
            let cfg = ProtocolConfig::new(protocol, 40)
                .with_noise(mode)
                .with_seed(1);
            let cb = Codebook::for_mode(protocol, mode).unwrap();
            let (r, _) = run(&cfg, &mut none()).unwrap();
            assert_eq!(r.ledger, expected_ledger(&cfg, &cb), "{protocol} {mode}");
        }
    }
}

#[test]
fn qubit_costs_per_key_bit() {
    let cost = |p, m| adapt_protocol(p, m).unwrap().qubits_per_key_bit;
    assert_eq!(cost(Protocol::One, NoiseMode::None), Ratio::new(9, 4));
    assert_eq!(cost(Protocol::Two, NoiseMode::None), Ratio::new(2, 1));
    assert_eq!(
        cost(Protocol::One, NoiseMode::CollectiveDephasing { phi: None }),
        Ratio::new(5, 2)
    );
    assert_eq!(
        cost(Protocol::One, NoiseMode::CollectiveRotation { theta: None }),
        Ratio::new(5, 1)
    );
    assert_eq!(
        cost(Protocol::Two, NoiseMode::CollectiveRotation { theta: None }),
        Ratio::new(4, 1)
    );
    assert!(!noise_rate_table().is_empty());
}

#[test]
fn noise_strings_round_trip() {
    for mode in noisy_modes().into_iter().flat_map(parameter_grid) {
        let s = mode.to_string();
        let back: NoiseMode = s.parse().unwrap();
        assert_eq!(back.to_string(), s);
    }
    assert!("pauli:0.5,0.5,0.5,0.5".parse::<NoiseMode>().is_err());
    assert!("ad:1.5".parse::<NoiseMode>().is_err());
}
