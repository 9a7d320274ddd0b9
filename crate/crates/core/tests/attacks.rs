use num_rational::Ratio;
use orthoqkd::adversary::{Adversary, Coverage, InTransit, QubitBasis, StageContext};
use orthoqkd::analysis::{attack_constant_table, error_probability, wrong_guess_block};
use orthoqkd::codebook::{
    basis_s, bell_states, gate_i, gate_x, gate_z, ket00, ket11, pair, phi, phi_prime, Codebook,
    Protocol,
};
use orthoqkd::engine::{run, ProtocolConfig};
use orthoqkd::qstate::{labels, Label, StateVector};
use orthoqkd::{AttackKind, AttackStrategy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CODING: [fn() -> [num_complex::Complex64; 4]; 4] = [ket00, ket11, phi, phi_prime];

/// Sends the pair `(A, B)` through both protocol I stages of `eve` with a
/// hook between them.
fn two_stages(
    eve: &mut AttackStrategy,
    reg: &mut StateVector,
    seed: u64,
    between: impl FnOnce(&StateVector),
) {
    let cb = Codebook::plain(Protocol::One);
    eve.start(Protocol::One, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = [false];
    let mut between = Some(between);
    for (stage, unit) in [(1u8, "B"), (2, "A")] {
        if stage == 2 {
            (between.take().unwrap())(reg);
        }
        let ctx = StageContext {
            protocol: Protocol::One,
            stage,
            codebook: &cb,
            r_string: Some(&r),
        };
        let units = [labels([unit])];
        let mut p = [InTransit {
            slot: 0,
            register: reg,
            units: &units,
            flags: &[],
        }];
        eve.intercept(&ctx, &mut p, &mut rng).unwrap();
    }
}

#[test]
fn computational_purification_leaves_product_states_alone() {
    for (k, state) in [ket00, ket11].into_iter().enumerate() {
        let mut reg = pair(state(), "A", "B");
        let mut eve = AttackStrategy::new(AttackKind::PurifySingleQubit {
            basis: QubitBasis::Computational,
            coverage: Coverage::Every,
        });
        two_stages(&mut eve, &mut reg, 0, |_| {});
        assert_eq!(reg.num_qubits(), 4);
        assert!(error_probability(&reg, &labels(["A", "B"]), k) < 1e-12);
        let bits = if k == 0 { "0000" } else { "1111" };
        let want = StateVector::basis_state(reg.labels().to_vec(), bits).unwrap();
        assert!(reg.equal_up_to_phase(&want, 1e-12));
    }
}

#[test]
fn plus_minus_purification_of_one_qubit_gives_half() {
    for (k, state) in CODING.into_iter().enumerate() {
        let mut reg = pair(state(), "A", "B");
        let mut eve = AttackStrategy::new(AttackKind::PurifySingleQubit {
            basis: QubitBasis::PlusMinus,
            coverage: Coverage::OnePerState,
        });
        two_stages(&mut eve, &mut reg, 0, |_| {});
        let e = error_probability(&reg, &labels(["A", "B"]), k);
        assert!((e - 0.5).abs() < 1e-12, "state {k}: {e}");
    }
}

#[test]
fn plus_minus_purification_of_both_qubits() {
    let want = [0.75, 0.75, 0.5, 0.5];
    for (k, state) in CODING.into_iter().enumerate() {
        let mut reg = pair(state(), "A", "B");
        let mut eve = AttackStrategy::new(AttackKind::PurifySingleQubit {
            basis: QubitBasis::PlusMinus,
            coverage: Coverage::Every,
        });
        two_stages(&mut eve, &mut reg, 0, |_| {});
        assert!((error_probability(&reg, &labels(["A", "B"]), k) - want[k]).abs() < 1e-12);
    }
}

#[test]
fn right_guess_block_purification_is_invisible() {
    let s = basis_s();
    for (x, sx) in CODING.iter().enumerate() {
        for (y, sy) in CODING.iter().enumerate() {
            let block = pair(sx(), "1", "2").tensor(&pair(sy(), "3", "4")).unwrap();
            let eve = block
                .purify(&s, &labels(["1", "2"]), &labels(["e1", "e2"]))
                .unwrap()
                .purify(&s, &labels(["3", "4"]), &labels(["e3", "e4"]))
                .unwrap();
            for (pair, want) in [(["1", "2"], x), (["3", "4"], y)] {
                let a = block.outcome_distribution(&s, &labels(pair)).unwrap();
                let b = eve.outcome_distribution(&s, &labels(pair)).unwrap();
                assert_eq!(
                    a.iter()
                        .zip(&b)
                        .filter(|(a, b)| (*a - *b).abs() > 1e-12)
                        .count(),
                    0
                );
                assert!((b[want] - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn wrong_guess_on_equal_product_states_is_harmless() {
    for k in 0..2 {
        let st = wrong_guess_block(k, k);
        assert!(error_probability(&st, &labels(["1", "2"]), k) < 1e-12);
        assert!(error_probability(&st, &labels(["3", "4"]), k) < 1e-12);
    }
    let st = wrong_guess_block(0, 1);
    assert!((error_probability(&st, &labels(["1", "2"]), 0) - 0.75).abs() < 1e-12);
}

#[test]
fn constant_table_structure() {
    let t = attack_constant_table();
    assert_eq!(t.rows.len(), 16);
    let mut matched = 0;
    for row in &t.rows {
        assert!((0.0..=1.0).contains(&row.first) && (0.0..=1.0).contains(&row.second));
        matched += usize::from(row.matches);
    }
    // Everything except the four entangled-entangled blocks.
    assert_eq!(matched, 12);
    assert_eq!(t.published_inline_sum, Ratio::new(88, 160));
    assert_eq!(t.published_case_mean, Ratio::new(93, 160));
    assert_eq!(t.wrong_guess_average, t.both_states_average);
    assert_eq!(t.whole_rate, t.wrong_guess_average / 2);
}

#[test]
fn two_stage_probes_never_show_product_outcomes_on_entangled_states() {
    for (k, state) in CODING.into_iter().enumerate() {
        let mut reg = pair(state(), "A", "B");
        let mut eve = AttackStrategy::new(AttackKind::TwoStage);
        two_stages(&mut eve, &mut reg, 5, |mid| {
            let probe = mid
                .labels()
                .iter()
                .find(|l| l.as_str().starts_with('E'))
                .unwrap()
                .clone();
            let p = mid
                .outcome_distribution(&basis_s(), &[Label::new("A"), probe])
                .unwrap();
            if k < 2 {
                assert!((p[k] - 1.0).abs() < 1e-12);
            } else {
                assert!(p[0] + p[1] < 1e-12, "state {k}: {p:?}");
                assert!((p[2] - 0.5).abs() < 1e-12);
            }
        });
        assert!(error_probability(&reg, &labels(["A", "B"]), k) < 1e-12);
    }
}

#[test]
fn two_stage_without_decoys_learns_every_product_state() {
    for seed in 0..5 {
        let cfg = ProtocolConfig::new(Protocol::One, 200)
            .with_seed(seed)
            .with_decoy_ratio(0.0);
        let (r, t) = run(&cfg, &mut AttackStrategy::new(AttackKind::TwoStage)).unwrap();
        assert_eq!(r.checking.errors, 0);
        assert!(!r.aborted);
        let eve = t.eve.unwrap();
        for (i, sym) in t.prepared_symbols.iter().enumerate() {
            if matches!(sym.value(), 0b00 | 0b11) {
                assert_eq!(eve.guesses[i], Some(*sym));
                assert!(eve.confident[i]);
            } else {
                assert_eq!(eve.guesses[i], None);
            }
        }
    }
}

#[test]
fn substitute_product_on_entangled_state_errs_at_least_half() {
    for (k, state) in CODING.into_iter().enumerate().skip(2) {
        for kind in ["substitute:product", "substitute:product:best"] {
            let mut reg = pair(state(), "A", "B");
            let mut eve = AttackStrategy::new(kind.parse().unwrap());
            two_stages(&mut eve, &mut reg, 9, |_| {});
            assert!(error_probability(&reg, &labels(["A", "B"]), k) >= 0.5 - 1e-12);
        }
    }
}

#[test]
fn measure_resend_on_product_state_is_clean() {
    let mut reg = pair(ket00(), "A", "B");
    let mut eve = AttackStrategy::new("measure-resend:computational".parse().unwrap());
    two_stages(&mut eve, &mut reg, 2, |_| {});
    assert!(error_probability(&reg, &labels(["A", "B"]), 0) < 1e-12);
}

#[test]
fn bell_codebook_is_locally_connected() {
    // Each Bell state maps to every other one by a Pauli on a single qubit,
    // so a Bell-state codebook can be rewritten by touching one particle.
    let bells = bell_states();
    let paulis = [
        gate_i(),
        gate_x(),
        gate_z(),
        gate_x().compose(&gate_z()).unwrap(),
    ];
    for a in &bells {
        for b in &bells {
            let from = pair(*a, "A", "B");
            let to = pair(*b, "A", "B");
            let hit = paulis.iter().any(|p| {
                from.apply_unitary(p, &labels(["B"]))
                    .unwrap()
                    .equal_up_to_phase(&to, 1e-12)
            });
            assert!(hit);
        }
    }
    // The coding set mixes product and entangled states, so no single-qubit
    // operation links |00⟩ to |φ⟩: their one-qubit marginals differ in purity.
    let purity = |s: &StateVector| {
        let r = s.reduced_density(&labels(["B"])).unwrap();
        r.iter().map(|x| x.norm_sqr()).sum::<f64>()
    };
    assert!((purity(&pair(ket00(), "A", "B")) - 1.0).abs() < 1e-12);
    assert!((purity(&pair(phi(), "A", "B")) - 0.5).abs() < 1e-12);
}

#[test]
fn knowledge_is_absent_for_blind_attacks() {
    for kind in [
        "none",
        "purify-single:computational",
        "measure-resend:plusminus",
    ] {
        let cfg = ProtocolConfig::new(Protocol::Two, 10).with_threshold(1.0);
        let (r, t) = run(&cfg, &mut AttackStrategy::new(kind.parse().unwrap())).unwrap();
        assert!(r.eve.is_none() && t.eve.is_none());
    }
    let cfg = ProtocolConfig::new(Protocol::Two, 10).with_threshold(1.0);
    let (r, _) = run(&cfg, &mut AttackStrategy::new(AttackKind::PurifyBlockS)).unwrap();
    assert_eq!(r.eve.unwrap().guessed, 20);
}

#[test]
fn block_attacks_rejected_on_protocol_one() {
    let cfg = ProtocolConfig::new(Protocol::One, 10);
    for kind in ["purify-block", "measure-resend:block"] {
        assert!(run(&cfg, &mut AttackStrategy::new(kind.parse().unwrap())).is_err());
    }
    let cfg = ProtocolConfig::new(Protocol::Two, 10);
    assert!(run(&cfg, &mut AttackStrategy::new(AttackKind::TwoStage)).is_err());
}
