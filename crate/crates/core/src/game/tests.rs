use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::group::{wrap_phase, ChargeLabel, GroupElement};
use crate::hilbert::{DensityMatrix, StateVector, SystemId};
use crate::neutral::{reduce_to_frame, relational_expectation, sector_project, KinematicalState, RelativeState};

fn sys(l: &str) -> SystemId {
    SystemId::from(l)
}

fn relative(kin: &KinematicalState, p: usize, frame: &str) -> RelativeState {
    let n = kin.modulus();
    let (phys, _) = sector_project(kin, ChargeLabel::new(p as i64, n)).unwrap();
    reduce_to_frame(&phys, &sys(frame), GroupElement::zero(n)).unwrap()
}

fn random_phi_b(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StateVector::random(vec![sys("B")], n, &mut rng).unwrap().into_amplitudes()
}

#[test]
fn branch_phase_hand_example() {
    let t = TwoBranch::new(0, 1, 2, 2, FRAC_PI_2);
    let kin = t.kinematical(4).unwrap();
    let rel = relative(&kin, 1, "A");
    let phase = branch_phase(&rel, &sys("C"), t.alice_markers(4)).unwrap();
    assert!(phase.abs() < 1e-12, "{phase}");
    let rel_c = relative(&kin, 1, "C");
    let phase_c = branch_phase(&rel_c, &sys("A"), t.charlie_markers(4)).unwrap();
    assert!((phase_c - FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn branch_phases_follow_the_sector_for_spread_out_b() {
    let n = 5;
    let t = TwoBranch::new(1, 4, 2, 1, 0.7).with_phi_b(random_phi_b(n, 3));
    let kin = t.kinematical(n).unwrap();
    for p in 0..n {
        let fa = branch_phase(&relative(&kin, p, "A"), &sys("C"), t.alice_markers(n)).unwrap();
        let fc = branch_phase(&relative(&kin, p, "C"), &sys("A"), t.charlie_markers(n)).unwrap();
        let step = TAU / n as f64;
        assert!(wrap_phase(fa - (0.7 + (1.0 - 4.0) * p as f64 * step)).abs() < 1e-10);
        assert!(wrap_phase(fc - (0.7 + 1.0 * p as f64 * step)).abs() < 1e-10);
    }
}

#[test]
fn momentum_eigenstate_b_makes_the_alignment_ambiguous() {
    let n = 4;
    let k1: Vec<Complex64> = (0..n).map(|y| crate::group::omega_pow(n, y as i64) * 0.5).collect();
    let t = TwoBranch::new(0, 1, 0, 0, 0.0).with_phi_b(k1);
    let rel = relative(&t.kinematical(n).unwrap(), 0, "A");
    assert!(matches!(branch_phase(&rel, &sys("C"), t.alice_markers(n)), Err(Error::Extraction(_))));
}

#[test]
fn phase_difference_examples() {
    let g = |v| GroupElement::new(v, 4);
    // Φ_A = −π/2, Φ_C = π/2 for P = 2
    let r = level3_recover_p_phase_difference(-FRAC_PI_2, FRAC_PI_2, g(0), g(1), g(0), g(0)).unwrap();
    assert_eq!(r, Recovery::Unique(ChargeLabel::new(2, 4)));
    // separation 2, true P = 1: Φ_A − Φ_C = −π
    let r = level3_recover_p_phase_difference(0.3 - PI, 0.3, g(0), g(2), g(0), g(0)).unwrap();
    assert_eq!(r.labels(), vec![ChargeLabel::new(1, 4), ChargeLabel::new(3, 4)]);
    let err = level3_recover_p_phase_difference(0.0, 0.0, g(0), g(1), g(0), g(1)).unwrap_err();
    assert!(matches!(err, Error::DegenerateGeometry(_)));
}

#[test]
fn phase_difference_recovers_every_sector_on_z5() {
    let n = 5;
    let t = TwoBranch::new(0, 3, 1, 1, 1.1);
    let kin = t.kinematical(n).unwrap();
    for p in 0..n {
        let fa = branch_phase(&relative(&kin, p, "A"), &sys("C"), t.alice_markers(n)).unwrap();
        let fc = branch_phase(&relative(&kin, p, "C"), &sys("A"), t.charlie_markers(n)).unwrap();
        let g = |v| GroupElement::new(v, n);
        let r = level3_recover_p_phase_difference(fa, fc, g(t.x1), g(t.x2), g(t.z1), g(t.z2)).unwrap();
        assert_eq!(r, Recovery::Unique(ChargeLabel::new(p as i64, n)), "P = {p}");
    }
}

#[test]
fn tomography_reproduces_relative_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [2, 3, 4] {
        let kin = KinematicalState::new(StateVector::random(players().to_vec(), n, &mut rng).unwrap()).unwrap();
        let rel = relative(&kin, 1, "A");
        let tomo = level2_tomography(&rel).unwrap();
        assert!(tomo.state.inner(rel.state()).unwrap().norm() > 1.0 - 1e-9);
        assert!(!tomo.mixed);
        assert_eq!(tomo.measurements, n.pow(4));
    }
}

#[test]
fn tomography_shortcut_matches_relational_observables() {
    let n = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let kin = KinematicalState::new(StateVector::random(players().to_vec(), n, &mut rng).unwrap()).unwrap();
    let rel = relative(&kin, 2, "A");
    let phys = rel.lift().unwrap();
    let tomo = level2_tomography(&rel).unwrap();
    let h = crate::observables::random_hermitian(vec![sys("B"), sys("C")], n, &mut rng).unwrap();
    let measured = relational_expectation(&phys, &sys("A"), GroupElement::zero(n), &h).unwrap();
    let predicted = tomo.density.expectation(&h).unwrap();
    assert!((measured - predicted).norm() < 1e-10);
}

#[test]
fn mixed_reconstruction_is_flagged() {
    let n = 2;
    let a = StateVector::basis(vec![sys("B"), sys("C")], n, &[0, 0]).unwrap();
    let b = StateVector::basis(vec![sys("B"), sys("C")], n, &[1, 1]).unwrap();
    let rho = DensityMatrix::mixture(&[(0.5, a), (0.5, b)]).unwrap();
    let tomo = level2_tomography_density(&rho).unwrap();
    assert!(tomo.mixed);
    assert!((tomo.purity - 0.5).abs() < 1e-12);
    assert!(tomo.density.max_abs_diff(&rho).unwrap() < 1e-12);
}

#[test]
fn ratio_method_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 5;
    for p in 0..n {
        let kin = KinematicalState::new(StateVector::random(players().to_vec(), n, &mut rng).unwrap()).unwrap();
        let (ra, rc) = (relative(&kin, p, "A"), relative(&kin, p, "C"));
        // arbitrary global phases, as after tomography
        let a = ra.state().clone().scaled(Complex64::from_polar(1.0, 0.4));
        let c = rc.state().clone().scaled(Complex64::from_polar(1.0, -2.0));
        let tables = RelativeWaveTables::from_states(&a, &c).unwrap();
        assert!(tables.identity_residual(ChargeLabel::new(p as i64, n)) < 1e-12);
        assert!(tables.identity_residual(ChargeLabel::new(p as i64 + 1, n)) > 1e-3);
        let r = level3_recover_p_ratio(&tables, PHASE_TOLERANCE).unwrap();
        assert_eq!(r, Recovery::Unique(ChargeLabel::new(p as i64, n)));
    }
}

#[test]
fn ratio_method_needs_two_relative_positions() {
    let n = 4;
    let t = TwoBranch::new(0, 1, 2, 3, 0.2).with_phi_b(random_phi_b(n, 1));
    let kin = t.kinematical(n).unwrap();
    let tables = RelativeWaveTables::from_states(relative(&kin, 1, "A").state(), relative(&kin, 1, "C").state()).unwrap();
    assert!(matches!(level3_recover_p_ratio(&tables, PHASE_TOLERANCE), Err(Error::Localization(_))));
}

#[test]
fn process_fit_on_random_pairs() {
    let n = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pairs: Vec<(StateVector, StateVector)> = (0..3)
        .map(|_| {
            let kin = KinematicalState::new(StateVector::random(players().to_vec(), n, &mut rng).unwrap()).unwrap();
            (relative(&kin, 3, "A").state().clone(), relative(&kin, 3, "C").state().clone())
        })
        .collect();
    let fit = level3_recover_p_process(&pairs).unwrap();
    assert_eq!(fit.best, ChargeLabel::new(3, n));
    assert!(fit.margin > 0.1, "{}", fit.margin);
    assert!((fit.scores[3] - 1.0).abs() < 1e-10);
}

#[test]
fn process_fit_with_localized_c_is_indeterminate() {
    let n = 4;
    let t = TwoBranch::new(0, 1, 2, 3, 0.2).with_phi_b(random_phi_b(n, 2));
    let kin = t.kinematical(n).unwrap();
    let pair = (relative(&kin, 1, "A").state().clone(), relative(&kin, 1, "C").state().clone());
    assert!(matches!(level3_recover_p_process(&[pair]), Err(Error::Indeterminate(_))));
}

#[test]
fn extra_particle_recovers_phase_and_separation() {
    let n = 5;
    let t = TwoBranch::new(3, 1, 2, 2, -0.9);
    let report = extra_particle_mode(&t.kinematical(n).unwrap(), t.alice_markers(n)).unwrap();
    assert!(report.weights.iter().all(|w| (w - 0.2).abs() < 1e-12));
    assert_eq!(report.separations, vec![2]);
    assert!((report.phi_candidates[0] + 0.9).abs() < 1e-9);
}

#[test]
fn superposed_sectors_give_mixed_relative_states() {
    let t = TwoBranch::new(1, 0, 2, 2, 0.3);
    let kin = t.kinematical(4).unwrap();
    let (p1, p2) = (ChargeLabel::new(3, 4), ChargeLabel::new(1, 4));
    let r = superposition_sector_demo(&kin, p1, p2).unwrap();
    assert!(r.branch_overlap < 1e-12);
    assert!((r.purity - 0.5).abs() < 1e-12);
    assert!(r.branch_fidelities.iter().all(|f| (f - 1.0).abs() < 1e-12));
    let same = superposition_sector_demo(&kin, p1, p1).unwrap();
    assert!((same.purity - 1.0).abs() < 1e-12);
    let near = superposition_sector_demo(&kin, p1, ChargeLabel::new(0, 4)).unwrap();
    assert!((near.purity - 0.5 * (1.0 + near.branch_overlap.powi(2))).abs() < 1e-12);
}

#[test]
fn framed_statistics_are_blind_for_c_tagged_states() {
    let n = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let kin = random_c_tagged(n, &mut rng).unwrap();
    for frame in ["A", "C"] {
        let base = relative(&kin, 0, frame).state().density();
        for p in 1..n {
            let other = relative(&kin, p, frame).state().density();
            assert!(level1_max_deviation(&base, &other, &sys("B"), None).unwrap() < 1e-12);
        }
    }
}

#[test]
fn framed_statistics_see_interference_when_branches_share_a_distance() {
    let n = 3;
    let t = TwoBranch::new(0, 1, 0, 1, 0.0);
    let kin = t.kinematical(n).unwrap();
    let a0 = relative(&kin, 0, "A").state().density();
    let a1 = relative(&kin, 1, "A").state().density();
    assert!(level1_max_deviation(&a0, &a1, &sys("B"), None).unwrap() > 0.1);
}

#[test]
fn superposition_and_mixture_of_frame_positions_look_alike() {
    let t = TwoBranch::new(0, 2, 1, 1, 0.8).with_phi_b(random_phi_b(4, 9));
    let rel = relative(&t.kinematical(4).unwrap(), 1, "A");
    let (m1, m2) = t.alice_markers(4);
    let parts: Vec<(f64, StateVector)> = [m1, m2]
        .iter()
        .map(|&m| {
            let keep = StateVector::from_fn(vec![sys("B"), sys("C")], 4, |d| {
                if d[1] == m { rel.state().amplitude(d) } else { Complex64::new(0.0, 0.0) }
            })
            .unwrap();
            (keep.norm().powi(2), keep.normalized().unwrap())
        })
        .collect();
    let mixture = DensityMatrix::mixture(&parts).unwrap();
    let dev = level1_max_deviation(&rel.state().density(), &mixture, &sys("B"), None).unwrap();
    assert!(dev < 1e-12);
}

#[test]
fn confusion_pairs_match_relative_to_a() {
    let n = 4;
    let t = TwoBranch::new(0, 3, 1, 2, 0.5).with_phi_b(random_phi_b(n, 6));
    let (p, q) = (ChargeLabel::new(1, n), ChargeLabel::new(2, n));
    let mut twin = t.clone();
    twin.phi = compensating_phase(&t, n, p, q);
    let a = relative(&t.kinematical(n).unwrap(), 1, "A");
    let b = relative(&twin.kinematical(n).unwrap(), 2, "A");
    assert!(a.state().inner(b.state()).unwrap().norm() > 1.0 - 1e-12);
    let c = relative(&confusion_partner(&t.kinematical(n).unwrap(), &sys("A"), p, q).unwrap(), 2, "A");
    assert!(a.state().max_abs_diff(c.state()).unwrap() < 1e-12);
}

#[test]
fn perspectival_variant_agrees_with_the_global_game() {
    let n = 5;
    let t = TwoBranch::new(0, 2, 4, 4, 0.1).with_phi_b(random_phi_b(n, 10));
    let kin = t.kinematical(n).unwrap();
    for p in 0..n {
        let rel = relative(&kin, p, "A");
        let alice = RelativeState::perspectival(rel.state().clone(), sys("A"), GroupElement::zero(n), rel.sector()).unwrap();
        for method in [Method::PhaseDifference, Method::Ratio, Method::Process] {
            let r = perspectival_variant_round(std::slice::from_ref(&alice), method, Some(t.alice_markers(n))).unwrap();
            assert_eq!(r, Recovery::Unique(ChargeLabel::new(p as i64, n)), "{method:?}");
        }
    }
}

#[test]
fn run_game_levels() {
    let t = TwoBranch::new(0, 1, 0, 0, FRAC_PI_2);
    let prep = Preparation::TwoBranch(t);
    let play = |level| run_game(&GameConfig::new(4, 2, prep.clone(), level)).unwrap();
    assert_eq!(play(Level::One).verdict, Verdict::Indistinguishable);
    let two = play(Level::Two);
    assert_eq!(two.verdict, Verdict::Indistinguishable);
    assert!(two.records.iter().any(|r| matches!(r.outcome, Outcome::ConfusionFidelity { fidelity, .. } if fidelity > 1.0 - 1e-9)));
    let three = play(Level::Three(Method::PhaseDifference));
    assert_eq!(three.verdict, Verdict::Recovered(ChargeLabel::new(2, 4)));
    assert_eq!(three.messages.len(), 2);
    match play(Level::ExtraParticle).verdict {
        Verdict::SectorProfile { separations, phi_candidates, .. } => {
            assert_eq!(separations, vec![3]);
            assert!((phi_candidates[0] - FRAC_PI_2).abs() < 1e-9);
        }
        v => panic!("{v:?}"),
    }
    assert_eq!(play(Level::Perspectival(Method::Ratio)).verdict, Verdict::Recovered(ChargeLabel::new(2, 4)));
}

#[test]
fn run_game_ratio_and_process_on_random_preparations() {
    let mut cfg = GameConfig::new(4, 3, Preparation::Random { seed: 17 }, Level::Three(Method::Ratio));
    assert_eq!(run_game(&cfg).unwrap().verdict, Verdict::Recovered(ChargeLabel::new(3, 4)));
    cfg.level = Level::Three(Method::Process);
    cfg.rounds = 3;
    assert_eq!(run_game(&cfg).unwrap().verdict, Verdict::Recovered(ChargeLabel::new(3, 4)));
}

#[test]
fn ambiguous_and_degenerate_games() {
    let prep = Preparation::TwoBranch(TwoBranch::new(0, 2, 0, 0, 0.0));
    let v = run_game(&GameConfig::new(4, 1, prep, Level::Three(Method::PhaseDifference))).unwrap().verdict;
    assert_eq!(v, Verdict::Candidates(vec![ChargeLabel::new(1, 4), ChargeLabel::new(3, 4)]));
    let prep = Preparation::TwoBranch(TwoBranch::new(0, 1, 0, 1, 0.0));
    let v = run_game(&GameConfig::new(4, 1, prep, Level::Three(Method::PhaseDifference))).unwrap().verdict;
    assert!(matches!(v, Verdict::Insufficient(_)));
}

#[test]
fn empty_sector_is_a_configuration_error() {
    let table: Vec<Complex64> = (0..8).map(|i| Complex64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)).collect();
    // |000⟩ on Z_2 has weight in both sectors; the uniform state only in sector 0
    let uniform = vec![Complex64::new(1.0, 0.0); 8];
    let cfg = GameConfig::new(2, 1, Preparation::Table(uniform), Level::Three(Method::Ratio));
    assert!(matches!(prepare(&cfg, 0), Err(Error::Configuration(_))));
    let ok = GameConfig::new(2, 1, Preparation::Table(table), Level::Three(Method::Ratio));
    assert!(prepare(&ok, 0).is_ok());
}

#[test]
fn observers_respect_their_level() {
    let n = 3;
    let kin = TwoBranch::new(0, 1, 1, 1, 0.0).kinematical(n).unwrap();
    let rel = relative(&kin, 0, "A");
    assert!(matches!(Observer::alice(Level::One).tomography(&rel), Err(Error::Contract(_))));
    let mut log = Vec::new();
    assert!(Observer::alice(Level::Two).send(&Observer::charlie(Level::Two), "x".into(), &mut log).is_err());
    assert!(Observer::charlie(Level::Two).tomography(&rel).is_err());
}

#[test]
fn finite_shots_approach_the_distribution() {
    let d = Distribution { values: vec![-1.0, 0.0, 2.0], probabilities: vec![0.2, 0.5, 0.3] };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = d.sample(200_000, &mut rng);
    assert!((s.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(s.total_variation(&d) < 0.01);
}

#[test]
fn tomography_of_a_sparse_two_branch_state_keeps_the_branch_phase() {
    let n = 4;
    let t = TwoBranch::new(0, 0, 0, 2, 0.3);
    let rel = relative(&t.kinematical(n).unwrap(), 1, "C");
    let tomo = level2_tomography(&rel).unwrap();
    assert!(tomo.state.amplitudes().iter().all(|z| z.is_finite()));
    let exact = branch_phase(&rel, &sys("A"), t.charlie_markers(n)).unwrap();
    let seen = extract_branch_phase(&tomo.state, &sys("A"), t.charlie_markers(n)).unwrap();
    assert!(wrap_phase(exact - seen).abs() < 1e-10);
    let cfg = GameConfig::new(n, 1, Preparation::TwoBranch(t), Level::Three(Method::PhaseDifference));
    let transcript = run_game(&cfg).unwrap();
    assert!(matches!(&transcript.verdict, Verdict::Candidates(c) if c == &vec![ChargeLabel::new(1, n), ChargeLabel::new(3, n)]));
}

#[test]
fn level3_game_recovers_every_sector_from_tomography() {
    let n = 5;
    for p in 0..n as i64 {
        let prep = Preparation::TwoBranch(TwoBranch::new(0, 2, 1, 4, 0.7));
        for method in [Method::PhaseDifference, Method::Ratio] {
            let transcript = run_game(&GameConfig::new(n, p, prep.clone(), Level::Three(method))).unwrap();
            assert!(matches!(transcript.verdict, Verdict::Recovered(q) if q == ChargeLabel::new(p, n)), "{p} {method:?}");
        }
    }
}
