use num_complex::Complex64;
use orthoqkd::codebook::{basis_plus_minus, basis_s, basis_s_prime};
use orthoqkd::qstate::{labels, Label, OrthonormalBasis, StateVector, Unitary};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_state(max_qubits: usize) -> impl Strategy<Value = StateVector> {
    (1..=max_qubits).prop_flat_map(|n| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n).prop_filter_map(
            "zero vector",
            move |v| {
                let amps: Vec<Complex64> =
                    v.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
                StateVector::new(labels((0..n).map(|k| format!("q{k}"))), amps).ok()
            },
        )
    })
}

fn arb_gate() -> impl Strategy<Value = Unitary> {
    (0.0f64..6.3, 0.0f64..6.3, 0.0f64..6.3).prop_map(|(a, b, c)| {
        let (s, co) = a.sin_cos();
        Unitary::new(
            1,
            vec![
                Complex64::new(co, 0.0),
                -Complex64::from_polar(s, c),
                Complex64::from_polar(s, b),
                Complex64::from_polar(co, b + c),
            ],
        )
        .expect("parametrised SU(2) element")
    })
}

fn norm_ok(s: &StateVector) -> bool {
    (s.norm_sqr() - 1.0).abs() < 1e-10
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn operations_keep_unit_norm(s in arb_state(5), g in arb_gate(), t in 0usize..5, seed in any::<u64>()) {
        prop_assert!(norm_ok(&s));
        let target = s.labels()[t % s.num_qubits()].clone();
        let u = s.apply_unitary(&g, std::slice::from_ref(&target)).unwrap();
        prop_assert!(norm_ok(&u));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, m) = u.measure(&OrthonormalBasis::computational(1), std::slice::from_ref(&target), &mut rng).unwrap();
        prop_assert!(norm_ok(&m));
        let p = u.purify(&basis_plus_minus(), std::slice::from_ref(&target), &[Label::new("anc")]).unwrap();
        prop_assert!(norm_ok(&p));
    }

    #[test]
    fn random_gates_are_unitary(a in arb_gate(), b in arb_gate()) {
        prop_assert!(a.unitarity_deviation() < 1e-10);
        prop_assert!(a.compose(&b).unwrap().unitarity_deviation() < 1e-10);
        prop_assert!(a.kron(&b).unitarity_deviation() < 1e-10);
    }

    #[test]
    fn permutation_round_trip_is_bit_exact(s in arb_state(6), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut order = s.labels().to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let there = s.permute(&order).unwrap();
        let back = there.permute(s.labels()).unwrap();
        prop_assert_eq!(back.amplitudes(), s.amplitudes());
        prop_assert_eq!(back.labels(), s.labels());
    }

    #[test]
    fn purification_preserves_measured_marginal(s in arb_state(4), which in 0usize..3) {
        prop_assume!(s.num_qubits() >= 2);
        let t = labels(["q0", "q1"]);
        let basis = [basis_s(), basis_s_prime(), OrthonormalBasis::computational(2)][which].clone();
        let before = s.outcome_distribution(&basis, &t).unwrap();
        let purified = s.purify(&basis, &t, &labels(["e0", "e1"])).unwrap();
        let after = purified.outcome_distribution(&basis, &t).unwrap();
        for (a, b) in before.iter().zip(&after) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        // The probe holds the outcome index.
        let probe = purified.outcome_distribution(&OrthonormalBasis::computational(2), &labels(["e0", "e1"])).unwrap();
        for (a, b) in before.iter().zip(&probe) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn distributions_sum_to_one(s in arb_state(4)) {
        prop_assume!(s.num_qubits() >= 2);
        let p = s.outcome_distribution(&basis_s(), &labels(["q1", "q0"])).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn frequencies_match_oracle_within_three_sigma() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 100_000;
    for case in 0..3 {
        let amps: Vec<Complex64> = (0..8)
            .map(|k| {
                Complex64::new(
                    ((k * 7 + case * 3) % 5) as f64 - 2.0,
                    ((k + case) % 3) as f64,
                )
            })
            .collect();
        let s = StateVector::new(labels(["a", "b", "c"]), amps).unwrap();
        let targets = labels(["c", "a"]);
        let p = s.outcome_distribution(&basis_s(), &targets).unwrap();
        let mut counts = [0usize; 4];
        for _ in 0..trials {
            counts[s.measure(&basis_s(), &targets, &mut rng).unwrap().0] += 1;
        }
        for k in 0..4 {
            let f = counts[k] as f64 / trials as f64;
            let sigma = (p[k] * (1.0 - p[k]) / trials as f64).sqrt();
            assert!(
                (f - p[k]).abs() <= 3.0 * sigma + 1e-12,
                "case {case} outcome {k}: {f} vs {}",
                p[k]
            );
        }
    }
}

#[test]
fn block_relabel_reorders_particles() {
    // b_{φ′φ′} with particles reordered 1234 → 1324.
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let pp = [0.0, r, r, 0.0];
    let a = StateVector::from_real(["1", "2"], &pp).unwrap();
    let b = StateVector::from_real(["3", "4"], &pp).unwrap();
    let block = a
        .tensor(&b)
        .unwrap()
        .permute(&labels(["1", "3", "2", "4"]))
        .unwrap();
    let mut want = [0.0; 16];
    for k in [0b0011, 0b0110, 0b1001, 0b1100] {
        want[k] = 0.5;
    }
    for (x, w) in block.amplitudes().iter().zip(want) {
        assert!((x - Complex64::new(w, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn singlet_pair_statistics() {
    // (|0101⟩ − |1010⟩)/√2 over A B A′ B′: measuring (A, B) in S gives φ or φ′.
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = [0.0; 16];
    amps[0b0101] = r;
    amps[0b1010] = -r;
    let s = StateVector::from_real(["A", "B", "E", "E'"], &amps).unwrap();
    let p = s
        .outcome_distribution(&basis_s(), &labels(["A", "B"]))
        .unwrap();
    let want = [0.0, 0.0, 0.5, 0.5];
    for (a, b) in p.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn z_tensor_z_negates_singlet() {
    let s = StateVector::from_real(["A", "B"], &[0.0, 1.0, -1.0, 0.0]).unwrap();
    let z = Unitary::single_real([[1.0, 0.0], [0.0, -1.0]]).unwrap();
    let out = s.apply_each(&z, &labels(["A", "B"])).unwrap();
    assert!((out.inner(&s).unwrap() + 1.0).norm() < 1e-12);
}
