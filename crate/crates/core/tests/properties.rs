use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qrf_core::game::{
    compensating_phase, extra_particle_mode, level1_max_deviation, level3_recover_p_ratio, players, random_c_tagged,
    Recovery, RelativeWaveTables, TwoBranch, PHASE_TOLERANCE,
};
use qrf_core::group::{character_eval, dft, wrap_phase, Character, ChargeLabel, GroupElement};
use qrf_core::hilbert::{
    operator_schmidt_decompose, partial_trace, schmidt_recompose, DenseOperator, StateVector, SystemId,
};
use qrf_core::neutral::{
    d_embedding_pipeline, frame_jump, reduce_to_frame, relational_expectation, sector_project, sector_weights,
    KinematicalState,
};
use qrf_core::observables::{
    parity, parity_invariant_sectors, proposition1_classify, random_hermitian, random_s0_invariant, theorem1_classify,
    ProductClass,
};
use qrf_core::transform::{
    build_s_f, build_s_p, canonical_transport, check_transitivity, check_unitarity_inverse, classify_admissible_phase,
    d_embedding_residual, FrameFamily, PhaseFunction,
};

fn sys(l: &str) -> SystemId {
    SystemId::from(l)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_kin(n: usize, seed: u64) -> KinematicalState {
    KinematicalState::new(StateVector::random(players().to_vec(), n, &mut rng(seed)).unwrap()).unwrap()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn characters_multiply(n in 2usize..=8, c in 0i64..8, x in 0i64..8, y in 0i64..8) {
        let ch = Character::new(ChargeLabel::new(c, n));
        let g = |v| GroupElement::new(v, n);
        let lhs = character_eval(ch, g(x)).unwrap() * character_eval(ch, g(y)).unwrap();
        prop_assert!((lhs - character_eval(ch, g(x + y)).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn characters_are_orthonormal(n in 2usize..=8, c in 0i64..8, d in 0i64..8) {
        let (a, b) = (Character::new(ChargeLabel::new(c, n)), Character::new(ChargeLabel::new(d, n)));
        let s: Complex64 = (0..n as i64)
            .map(|x| character_eval(a, GroupElement::new(x, n)).unwrap() * character_eval(b, GroupElement::new(x, n)).unwrap().conj())
            .sum::<Complex64>() / n as f64;
        let expected = if (c - d).rem_euclid(n as i64) == 0 { 1.0 } else { 0.0 };
        prop_assert!((s - expected).norm() < 1e-12);
    }

    #[test]
    fn pure_states_have_unit_purity(n in 2usize..=4, seed in any::<u64>()) {
        let s = StateVector::random(players().to_vec(), n, &mut rng(seed)).unwrap();
        prop_assert!((s.density().purity() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn transport_and_transitivity(n in 2usize..=6, p in 0i64..6) {
        let sector = ChargeLabel::new(p, n);
        prop_assert!(canonical_transport(sector).unwrap().max() < 1e-9);
        let t = check_transitivity(&FrameFamily::Sector(sector)).unwrap();
        prop_assert!(t.holds, "residual {}", t.residual);
    }

    #[test]
    fn sectors_are_complete(n in 2usize..=6, seed in any::<u64>()) {
        let total: f64 = sector_weights(&random_kin(n, seed)).iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }
}

#[test]
fn dft_is_unitary() {
    for n in 2..=8 {
        let cols: Vec<Vec<Complex64>> = (0..n)
            .map(|j| dft(&(0..n).map(|i| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect::<Vec<_>>()))
            .collect();
        let f = DMatrix::from_fn(n, n, |i, j| cols[j][i]);
        let defect = (f.adjoint() * &f - DMatrix::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(defect < 1e-12);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn schmidt_terms_rebuild_the_operator(n in 2usize..=3, seed in any::<u64>()) {
        let reg = vec![sys("B"), sys("C"), sys("D")];
        let op = random_hermitian(reg.clone(), n, &mut rng(seed)).unwrap();
        let terms = operator_schmidt_decompose(&op, &reg[..1]).unwrap();
        prop_assert!(terms.iter().all(|t| t.coefficient >= 0.0));
        let back = schmidt_recompose(&terms, &reg).unwrap();
        prop_assert!(back.max_abs_diff(&op).unwrap() < 1e-9);
    }

    #[test]
    fn partial_trace_is_a_state(n in 2usize..=4, seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = StateVector::random(players().to_vec(), n, &mut r).unwrap();
        let b = StateVector::random(players().to_vec(), n, &mut r).unwrap();
        let rho = qrf_core::hilbert::DensityMatrix::mixture(&[(0.3, a), (0.7, b)]).unwrap();
        for keep in [vec![sys("A")], vec![sys("C"), sys("A")]] {
            let red = partial_trace(&rho, &keep).unwrap();
            prop_assert!((red.trace() - 1.0).abs() < 1e-10);
            prop_assert!(red.min_eigenvalue() > -1e-9);
        }
    }

    #[test]
    fn d_embedding_holds(n in 2usize..=5, p in 0i64..5, seed in any::<u64>()) {
        let sector = ChargeLabel::new(p, n);
        let psi = StateVector::random(vec![sys("B"), sys("C")], n, &mut rng(seed)).unwrap();
        prop_assert!(d_embedding_residual(&psi, sector).unwrap() < 1e-10);
        let report = d_embedding_pipeline(&random_kin(n, seed), sector, &sys("C"), GroupElement::new(1, n)).unwrap();
        prop_assert!(report.fidelity > 1.0 - 1e-10);
        prop_assert!((report.d_purity - 1.0).abs() < 1e-10);
    }

    #[test]
    fn admissible_iff_transitive_and_unitary(n in 2usize..=8, seed in any::<u64>(), character in any::<bool>()) {
        let mut r = rng(seed);
        let c = rand::Rng::random_range(&mut r, 0..n as i64);
        let f = if character {
            PhaseFunction::linear(n, c)
        } else {
            let table: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut r, 0.0..TAU)).collect();
            PhaseFunction::new(table).unwrap()
        };
        let fc = build_s_f(&sys("A"), &sys("C"), &[sys("B")], &f).unwrap();
        let good = check_transitivity(&FrameFamily::Phase(f.clone())).unwrap().holds
            && check_unitarity_inverse(&fc).unwrap().holds;
        prop_assert_eq!(classify_admissible_phase(&f).is_admissible(), good);
        if character {
            prop_assert!(good);
        }
    }

    #[test]
    fn physical_states_are_covariant(n in 2usize..=6, p in 0i64..6, seed in any::<u64>()) {
        let (phys, _) = sector_project(&random_kin(n, seed), ChargeLabel::new(p, n)).unwrap();
        prop_assert!(phys.covariance_defect() < 1e-10);
        for frame in players() {
            for x in 0..n {
                let norm = phys.state().condition_on(&frame, x).unwrap().norm();
                prop_assert!((norm - 1.0 / (n as f64).sqrt()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn commuting_square(n in 2usize..=6, p in 0i64..6, x in 0i64..6, z in 0i64..6, seed in any::<u64>()) {
        let (phys, _) = sector_project(&random_kin(n, seed), ChargeLabel::new(p, n)).unwrap();
        let (x, z) = (GroupElement::new(x, n), GroupElement::new(z, n));
        let via_a = frame_jump(&reduce_to_frame(&phys, &sys("A"), x).unwrap(), &sys("C"), z).unwrap();
        let direct = reduce_to_frame(&phys, &sys("C"), z).unwrap();
        prop_assert!(via_a.state().max_abs_diff(direct.state()).unwrap() < 1e-10);
    }

    #[test]
    fn relational_expectations_match_relative_ones(n in 2usize..=4, p in 0i64..4, x in 0i64..4, seed in any::<u64>()) {
        let mut r = rng(seed);
        let (phys, _) = sector_project(&random_kin(n, seed), ChargeLabel::new(p, n)).unwrap();
        let origin = GroupElement::new(x, n);
        let rel = reduce_to_frame(&phys, &sys("A"), origin).unwrap();
        let h = random_hermitian(vec![sys("B"), sys("C")], n, &mut r).unwrap();
        let relational = relational_expectation(&phys, &sys("A"), origin, &h).unwrap();
        prop_assert!((relational - h.expectation(rel.state()).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn branch_phase_law(n in 3usize..=7, p in 0i64..7, x1 in 0i64..7, x2 in 0i64..7, z1 in 0i64..7, z2 in 0i64..7,
                        phi in -3.0f64..3.0, seed in any::<u64>()) {
        let sector = ChargeLabel::new(p, n);
        let t = TwoBranch::new(x1, x2, z1, z2, phi)
            .with_phi_b(StateVector::random(vec![sys("B")], n, &mut rng(seed)).unwrap().into_amplitudes());
        let (m1, m2) = t.alice_markers(n);
        prop_assume!(m1 != m2);
        let (phys, _) = sector_project(&t.kinematical(n).unwrap(), sector).unwrap();
        let rel = reduce_to_frame(&phys, &sys("A"), GroupElement::zero(n)).unwrap();
        let got = qrf_core::game::branch_phase(&rel, &sys("C"), (m1, m2)).unwrap();
        let expected = phi + ((x1 - x2) * sector.value() as i64) as f64 * TAU / n as f64;
        prop_assert!(wrap_phase(got - expected).abs() < 1e-9);
    }

    #[test]
    fn ratio_recovery_and_wave_identity(n in 2usize..=8, p in 0i64..8, seed in any::<u64>()) {
        let sector = ChargeLabel::new(p, n);
        let (phys, _) = sector_project(&random_kin(n, seed), sector).unwrap();
        let o = GroupElement::zero(n);
        let a = reduce_to_frame(&phys, &sys("A"), o).unwrap().state().clone().scaled(Complex64::from_polar(1.0, 1.3));
        let c = reduce_to_frame(&phys, &sys("C"), o).unwrap();
        let tables = RelativeWaveTables::from_states(&a, c.state()).unwrap();
        prop_assert!(tables.identity_residual(sector) < 1e-10);
        prop_assert_eq!(level3_recover_p_ratio(&tables, PHASE_TOLERANCE).unwrap(), Recovery::Unique(sector));
    }

    #[test]
    fn level1_blind_on_c_tagged_states(n in 2usize..=4, p in 0i64..4, q in 0i64..4, seed in any::<u64>()) {
        let kin = random_c_tagged(n, &mut rng(seed)).unwrap();
        for frame in [sys("A"), sys("C")] {
            let rho = |s: i64| {
                let (phys, _) = sector_project(&kin, ChargeLabel::new(s, n)).unwrap();
                reduce_to_frame(&phys, &frame, GroupElement::zero(n)).unwrap().state().density()
            };
            prop_assert!(level1_max_deviation(&rho(p), &rho(q), &sys("B"), None).unwrap() < 1e-10);
        }
    }

    #[test]
    fn extra_particle_returns_the_preparation_phase(n in 3usize..=7, x1 in 0i64..7, x2 in 0i64..7, z in 0i64..7, phi in -3.0f64..3.0) {
        prop_assume!((x1 - x2).rem_euclid(n as i64) != 0);
        let t = TwoBranch::new(x1, x2, z, z, phi);
        let report = extra_particle_mode(&t.kinematical(n).unwrap(), t.alice_markers(n)).unwrap();
        prop_assert_eq!(report.separations.clone(), vec![(x1 - x2).rem_euclid(n as i64) as usize]);
        prop_assert!(wrap_phase(report.phi_candidates[0] - phi).abs() < 1e-9);
    }

    #[test]
    fn confusion_pairs(n in 3usize..=6, p in 0i64..6, q in 0i64..6, x1 in 0i64..6, x2 in 0i64..6, z1 in 0i64..6, z2 in 0i64..6, seed in any::<u64>()) {
        let (sp, sq) = (ChargeLabel::new(p, n), ChargeLabel::new(q, n));
        prop_assume!(sp != sq);
        let t = TwoBranch::new(x1, x2, z1, z2, 0.4)
            .with_phi_b(StateVector::random(vec![sys("B")], n, &mut rng(seed)).unwrap().into_amplitudes());
        let mut twin = t.clone();
        twin.phi = compensating_phase(&t, n, sp, sq);
        let view = |tb: &TwoBranch, s: ChargeLabel, frame: &str| {
            let (phys, _) = sector_project(&tb.kinematical(n).unwrap(), s).unwrap();
            reduce_to_frame(&phys, &sys(frame), GroupElement::zero(n)).unwrap().state().clone()
        };
        prop_assert!(view(&t, sp, "A").inner(&view(&twin, sq, "A")).unwrap().norm() > 1.0 - 1e-10);
        let (m1, m2) = t.alice_markers(n);
        let c_fid = view(&t, sp, "C").inner(&view(&twin, sq, "C")).unwrap().norm();
        // relative to C the branch phases differ unless the geometry is degenerate
        let shift = ((x1 - x2) - (z1 - z2)) * (p - q);
        if m1 != m2 && shift.rem_euclid(n as i64) != 0 {
            prop_assert!(c_fid < 1.0 - 1e-6);
        }
    }
}

fn circulant(n: usize, r: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    // f(k̂) in the position basis: Hermitian, translation invariant
    let f: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(r, -1.0..1.0)).collect();
    DMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| f[k] * qrf_core::group::omega_pow(n, (k * (i + n - j)) as i64)).sum::<Complex64>() / n as f64
    })
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn theorem1_biconditional(n in 2usize..=5, seed in any::<u64>(), extra in 0i64..5, twirl in any::<bool>()) {
        let mut r = rng(seed);
        let extra = twirl.then(|| ChargeLabel::new(extra, n));
        let op = random_s0_invariant(&sys("B"), &sys("C"), n, extra, &mut r).unwrap();
        let report = theorem1_classify(&op, &sys("A"), &sys("C"), &[sys("B")]).unwrap();
        prop_assert!(report.s0_invariant);
        prop_assert!(report.biconditional_agrees());
    }

    #[test]
    fn product_families_are_never_mixed(n in 2usize..=6, seed in any::<u64>(), anticommuting in any::<bool>()) {
        let mut r = rng(seed);
        let (ob, oc) = if anticommuting {
            // reflections x ↦ a − x on B, antidiagonal on C
            let c: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut r, -1.0..1.0)).collect();
            let ob = DMatrix::from_fn(n, n, |i, j| Complex64::new(c[(i + j) % n], 0.0));
            let g: Vec<Complex64> = (0..n).map(|_| Complex64::new(rand::Rng::random_range(&mut r, -1.0..1.0), rand::Rng::random_range(&mut r, -1.0..1.0))).collect();
            let oc = DMatrix::from_fn(n, n, |i, j| if (i + j) % n == 0 { g[i] } else { Complex64::new(0.0, 0.0) });
            let oc = (&oc + oc.adjoint()) * Complex64::new(0.5, 0.0);
            (ob, oc)
        } else {
            let d: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut r, -1.0..1.0)).collect();
            (circulant(n, &mut r), DMatrix::from_fn(n, n, |i, j| Complex64::new(if i == j { d[i] } else { 0.0 }, 0.0)))
        };
        prop_assume!(ob.norm() > 1e-6 && oc.norm() > 1e-6);
        let ob = DenseOperator::local(sys("B"), n, ob).unwrap();
        let oc = DenseOperator::local(sys("C"), n, oc).unwrap();
        let class = proposition1_classify(&ob, &oc).unwrap();
        prop_assert!(matches!(class, ProductClass::Case1Commuting | ProductClass::Case2Anticommuting), "{:?}", class);
    }
}

#[test]
fn parity_sectors() {
    for n in 2..=8 {
        let op = parity(&sys("B"), n).tensor(&parity(&sys("C"), n)).unwrap();
        let report = theorem1_classify(&op, &sys("A"), &sys("C"), &[sys("B")]).unwrap();
        let got: Vec<usize> = report.brute_force_sectors.iter().map(|p| p.value()).collect();
        assert_eq!(got, parity_invariant_sectors(n));
        assert!(report.biconditional_agrees());
    }
}

#[test]
fn standard_frame_change_matches_linear_phase_at_opposite_sector() {
    for n in 2..=6 {
        for c in 0..n as i64 {
            let f = build_s_f(&sys("A"), &sys("C"), &[sys("B")], &PhaseFunction::linear(n, c)).unwrap();
            let s = build_s_p(&sys("A"), &sys("C"), &[sys("B")], ChargeLabel::new(-c, n)).unwrap();
            assert!(f.unitary.max_abs_diff(&s.unitary).unwrap() < 1e-12);
        }
    }
}
