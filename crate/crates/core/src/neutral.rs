//! Perspective-neutral pipeline: kinematical preparation, projection onto a
//! charge sector, reduction into an internal frame, jumps between frames,
//! and the invariant observables that survive the constraint.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{omega_pow, reduce, ChargeLabel, GroupElement};
use crate::hilbert::{partial_trace, Context, DenseOperator, DensityMatrix, StateVector, SystemId};
use crate::transform::{build_s_p_xz, momentum_state};

/// Projections with a smaller squared norm count as empty sectors.
pub const EMPTY_SECTOR_WEIGHT: f64 = 1e-12;

/// A state relative to the external referee.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicalState {
    state: StateVector,
}

impl KinematicalState {
    pub fn new(state: StateVector) -> Result<Self> {
        let state = state.normalized()?.with_context(Context::External);
        Ok(Self { state })
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn modulus(&self) -> usize {
        self.state.modulus()
    }
}

/// A state in a single charge sector: `U(x)ψ = ω^{Px}ψ` for every total
/// translation `U(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalState {
    state: StateVector,
    sector: ChargeLabel,
}

impl PhysicalState {
    /// Wraps a state already known to lie in `sector`, verifying covariance.
    pub fn new(state: StateVector, sector: ChargeLabel, tol: f64) -> Result<Self> {
        let state = state.normalized()?.with_context(Context::Physical { sector });
        let phys = Self { state, sector };
        let defect = phys.covariance_defect();
        if defect > tol {
            return Err(Error::Contract(format!("state is not in sector {sector} (covariance defect {defect:.3e})")));
        }
        Ok(phys)
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn sector(&self) -> ChargeLabel {
        self.sector
    }

    pub fn modulus(&self) -> usize {
        self.state.modulus()
    }

    /// `max_x ‖U(x)ψ − ω^{Px}ψ‖_max`.
    pub fn covariance_defect(&self) -> f64 {
        let n = self.modulus();
        let p = self.sector.value() as i64;
        (0..n as i64)
            .map(|x| {
                let shifted = translate_all(&self.state, -x);
                let target = self.state.clone().scaled(omega_pow(n, p * x));
                shifted.max_abs_diff(&target).expect("same registry")
            })
            .fold(0.0, f64::max)
    }
}

/// A state relative to `frame` placed at `origin`. The frame is absent from
/// the registry.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeState {
    state: StateVector,
    frame: SystemId,
    origin: GroupElement,
    sector: ChargeLabel,
    conditional_norm: f64,
}

impl RelativeState {
    /// A perspectival state supplied directly (no global state behind it).
    pub fn perspectival(state: StateVector, frame: SystemId, origin: GroupElement, sector: ChargeLabel) -> Result<Self> {
        if state.systems().contains(&frame) {
            return Err(Error::Composition(format!("frame {frame} cannot appear in its own relative state")));
        }
        let state = state.normalized()?.with_context(Context::Relative { frame: frame.clone(), origin, sector });
        Ok(Self { state, frame, origin, sector, conditional_norm: 1.0 })
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn frame(&self) -> &SystemId {
        &self.frame
    }

    pub fn origin(&self) -> GroupElement {
        self.origin
    }

    pub fn sector(&self) -> ChargeLabel {
        self.sector
    }

    pub fn modulus(&self) -> usize {
        self.state.modulus()
    }

    /// Norm of the conditional vector discarded by renormalization.
    pub fn conditional_norm(&self) -> f64 {
        self.conditional_norm
    }

    /// Rebuilds the global physical state whose reduction this is:
    /// `ψ(x, d) = N^{-1/2} ω^{P(x−X)} φ(d − (x−X))`.
    pub fn lift(&self) -> Result<PhysicalState> {
        let n = self.modulus();
        let p = self.sector.value() as i64;
        let rest = self.state.systems().to_vec();
        let mut reg = vec![self.frame.clone()];
        reg.extend(rest.iter().cloned());
        let x0 = self.origin.value() as i64;
        let scale = 1.0 / (n as f64).sqrt();
        let state = StateVector::from_fn(reg, n, |d| {
            let s = d[0] as i64 - x0;
            let back: Vec<usize> = d[1..].iter().map(|&v| reduce(v as i64 - s, n)).collect();
            self.state.amplitude(&back) * omega_pow(n, p * s) * scale
        })?;
        PhysicalState::new(state, self.sector, 1e-9)
    }
}

/// `|d⟩ ↦ |d + s⟩` on every system.
fn translate_all(state: &StateVector, s: i64) -> StateVector {
    state.translated(state.systems(), s).expect("own systems")
}

/// `Π_P ψ` with `Π_P = (1/N) Σ_x ω^{−Px} U(x)`, unnormalized.
fn project(state: &StateVector, sector: ChargeLabel) -> StateVector {
    let n = state.modulus();
    let p = sector.value() as i64;
    let mut acc = vec![Complex64::new(0.0, 0.0); state.dim()];
    for x in 0..n as i64 {
        let shifted = translate_all(state, -x);
        let w = omega_pow(n, -p * x) / n as f64;
        for (a, b) in acc.iter_mut().zip(shifted.amplitudes()) {
            *a += w * b;
        }
    }
    StateVector::new(state.systems().to_vec(), n, acc, Context::Physical { sector }).expect("same registry")
}

/// Coherent group average onto `sector`; returns the normalized physical
/// state and the squared norm of the projection.
pub fn sector_project(kin: &KinematicalState, sector: ChargeLabel) -> Result<(PhysicalState, f64)> {
    let n = kin.modulus();
    if sector.modulus() != n {
        return Err(Error::ModulusMismatch { left: sector.modulus(), right: n });
    }
    let projected = project(kin.state(), sector);
    let weight = projected.norm().powi(2);
    if weight < EMPTY_SECTOR_WEIGHT {
        return Err(Error::EmptySector { sector: sector.value(), weight });
    }
    let state = projected.normalized()?;
    Ok((PhysicalState { state, sector }, weight))
}

/// Weight of every sector, indexed by charge label.
pub fn sector_weights(kin: &KinematicalState) -> Vec<f64> {
    ChargeLabel::all(kin.modulus()).map(|p| project(kin.state(), p).norm().powi(2)).collect()
}

/// Conditions the frame on position `origin` and renormalizes.
pub fn reduce_to_frame(phys: &PhysicalState, frame: &SystemId, origin: GroupElement) -> Result<RelativeState> {
    let cond = phys.state.condition_on(frame, origin.value())?;
    let norm = cond.norm();
    if norm < EMPTY_SECTOR_WEIGHT.sqrt() {
        return Err(Error::Reduction { frame: frame.to_string(), origin: origin.value() });
    }
    let sector = phys.sector;
    let state = cond.normalized()?.with_context(Context::Relative { frame: frame.clone(), origin, sector });
    Ok(RelativeState { state, frame: frame.clone(), origin, sector, conditional_norm: norm })
}

/// Moves from the current frame to `new_frame` at `origin` with the
/// perspective-neutral frame change.
pub fn frame_jump(rel: &RelativeState, new_frame: &SystemId, origin: GroupElement) -> Result<RelativeState> {
    let spectators: Vec<SystemId> = rel.state.systems().iter().filter(|s| *s != new_frame).cloned().collect();
    if spectators.len() == rel.state.systems().len() {
        return Err(Error::Composition(format!("{new_frame} is not part of the relative state")));
    }
    let fc = build_s_p_xz(&rel.frame, new_frame, &spectators, rel.sector, rel.origin, origin)?;
    let sector = rel.sector;
    let state = fc
        .apply(rel.state())?
        .with_context(Context::Relative { frame: new_frame.clone(), origin, sector });
    Ok(RelativeState { state, frame: new_frame.clone(), origin, sector, conditional_norm: rel.conditional_norm })
}

/// Basis-index permutation of `U(x)` on `k` systems: `U(x)|d⟩ = |d − x⟩`.
fn shift_indices(n: usize, k: usize, x: i64) -> Vec<usize> {
    let dim = n.pow(k as u32);
    (0..dim)
        .map(|i| {
            let mut idx = 0;
            let mut rem = i;
            let mut place = 1;
            for _ in 0..k {
                let digit = rem % n;
                rem /= n;
                idx += reduce(digit as i64 - x, n) * place;
                place *= n;
            }
            idx
        })
        .collect()
}

/// `(1/N) Σ_x U^P(x) O U^P(x)†` over the operator's own registry. The
/// charge phase cancels in the conjugation.
pub fn incoherent_twirl(op: &DenseOperator, sector: ChargeLabel) -> Result<DenseOperator> {
    let n = op.modulus();
    if sector.modulus() != n || !op.is_square_registry() {
        return Err(Error::Composition("twirl needs a square-registry operator of matching modulus".into()));
    }
    let k = op.in_systems().len();
    let d = op.matrix().nrows();
    let mut acc = DMatrix::zeros(d, d);
    for x in 0..n as i64 {
        // (U O U†)[σ(i), σ(j)] = O[i, j]
        let sigma = shift_indices(n, k, x);
        for j in 0..d {
            for i in 0..d {
                acc[(sigma[i], sigma[j])] += op.matrix()[(i, j)];
            }
        }
    }
    acc /= Complex64::new(n as f64, 0.0);
    DenseOperator::square(op.in_systems().to_vec(), n, acc)
}

/// `‖U(x) O U(x)† − O‖_max` maximized over `x`.
pub fn translation_defect(op: &DenseOperator) -> f64 {
    let n = op.modulus();
    let k = op.in_systems().len();
    let d = op.matrix().nrows();
    let mut worst: f64 = 0.0;
    for x in 1..n as i64 {
        let sigma = shift_indices(n, k, x);
        for j in 0..d {
            for i in 0..d {
                worst = worst.max((op.matrix()[(sigma[i], sigma[j])] - op.matrix()[(i, j)]).norm());
            }
        }
    }
    worst
}

fn conjugate_by_shift(op: &DenseOperator, s: i64) -> DenseOperator {
    // V_s shifts every system by +s, i.e. U(−s)
    let n = op.modulus();
    let sigma = shift_indices(n, op.in_systems().len(), -s);
    let d = op.matrix().nrows();
    let mut m = DMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            m[(sigma[i], sigma[j])] = op.matrix()[(i, j)];
        }
    }
    DenseOperator::square(op.in_systems().to_vec(), n, m).expect("same registry")
}

/// Relational observable `Σ_x |x⟩⟨x|_frame ⊗ V_{x−X} O V_{x−X}†`, where
/// `V_s` translates the non-frame systems by `+s`. On the registry
/// `[frame] ++ O's systems`.
pub fn relational_observable(op: &DenseOperator, frame: &SystemId, origin: GroupElement, sector: ChargeLabel) -> Result<DenseOperator> {
    let n = op.modulus();
    if sector.modulus() != n || origin.modulus() != n {
        return Err(Error::ModulusMismatch { left: n, right: sector.modulus() });
    }
    if !op.is_square_registry() || op.in_systems().contains(frame) {
        return Err(Error::Composition(format!("observable must be square and must not act on {frame}")));
    }
    let mut reg = vec![frame.clone()];
    reg.extend(op.in_systems().iter().cloned());
    let d = op.matrix().nrows();
    let mut m = DMatrix::zeros(n * d, n * d);
    for x in 0..n {
        let block = conjugate_by_shift(op, x as i64 - origin.value() as i64);
        m.view_mut((x * d, x * d), (d, d)).copy_from(block.matrix());
    }
    DenseOperator::square(reg, n, m)
}

/// `⟨ψ| F_{O,frame}(X) |ψ⟩` evaluated branch by branch, without building
/// the relational operator.
pub fn relational_expectation(phys: &PhysicalState, frame: &SystemId, origin: GroupElement, op: &DenseOperator) -> Result<Complex64> {
    let n = phys.modulus();
    let mut total = Complex64::new(0.0, 0.0);
    for x in 0..n {
        let branch = phys.state.condition_on(frame, x)?;
        let conj = conjugate_by_shift(op, x as i64 - origin.value() as i64);
        total += conj.expectation(&branch)?;
    }
    Ok(total)
}

/// Outcome of comparing the three-party sector-`P` pipeline with the
/// four-party sector-0 pipeline carrying `D` at momentum `−P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DEmbeddingReport {
    pub fidelity: f64,
    pub d_purity: f64,
    pub weight_three_party: f64,
    pub weight_four_party: f64,
}

/// Runs both pipelines on `kin` (systems `A, B, C`), reducing to `frame` at
/// `origin` and tracing out `D` at the end.
pub fn d_embedding_pipeline(kin: &KinematicalState, sector: ChargeLabel, frame: &SystemId, origin: GroupElement) -> Result<DEmbeddingReport> {
    let n = kin.modulus();
    let d = SystemId::from("D");
    let (phys3, w3) = sector_project(kin, sector)?;
    let rel3 = reduce_to_frame(&phys3, frame, origin)?;

    let kin4 = KinematicalState::new(kin.state().tensor(&momentum_state(&d, n, -(sector.value() as i64)))?)?;
    let (phys4, w4) = sector_project(&kin4, ChargeLabel::new(0, n))?;
    let rel4 = reduce_to_frame(&phys4, frame, origin)?;
    let rho4 = rel4.state().density();
    let keep: Vec<SystemId> = rel3.state().systems().to_vec();
    let reduced = partial_trace(&rho4, &keep)?;
    let d_state = partial_trace(&rho4, std::slice::from_ref(&d))?;
    Ok(DEmbeddingReport {
        fidelity: reduced.fidelity_with_pure(rel3.state())?,
        d_purity: d_state.purity(),
        weight_three_party: w3,
        weight_four_party: w4,
    })
}

/// Density matrix of a relative state with an extra system traced out.
pub fn reduced_relative_density(rel: &RelativeState, keep: &[SystemId]) -> Result<DensityMatrix> {
    partial_trace(&rel.state().density(), keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::systems;
    use crate::transform::clock;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn kin(labels: &[&str], n: usize, digits: &[usize]) -> KinematicalState {
        KinematicalState::new(StateVector::basis(systems(labels), n, digits).unwrap()).unwrap()
    }

    #[test]
    fn projection_of_two_qubits() {
        let k = kin(&["A", "B"], 2, &[0, 0]);
        let (p0, w0) = sector_project(&k, ChargeLabel::new(0, 2)).unwrap();
        assert!((w0 - 0.5).abs() < 1e-15);
        assert!((p0.state().amplitude(&[0, 0]).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((p0.state().amplitude(&[1, 1]).re - FRAC_1_SQRT_2).abs() < 1e-15);
        let (p1, w1) = sector_project(&k, ChargeLabel::new(1, 2)).unwrap();
        assert!((w1 - 0.5).abs() < 1e-15);
        assert!((p1.state().amplitude(&[1, 1]).re + FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn momentum_product_state_lies_in_one_sector() {
        let n = 5;
        let s = StateVector::momentum("A".into(), n, 2).tensor(&StateVector::momentum("B".into(), n, 4)).unwrap();
        let k = KinematicalState::new(s.clone()).unwrap();
        let (phys, w) = sector_project(&k, ChargeLabel::new(1, n)).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
        assert!((phys.state().inner(&s).unwrap().norm() - 1.0).abs() < 1e-12);
        assert!(matches!(sector_project(&k, ChargeLabel::new(0, n)), Err(Error::EmptySector { .. })));
    }

    #[test]
    fn sector_weights_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = StateVector::random(systems(&["A", "B", "C"]), 4, &mut rng).unwrap();
        let w: f64 = sector_weights(&KinematicalState::new(s).unwrap()).iter().sum();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reduction_of_bell_pair() {
        let (p0, _) = sector_project(&kin(&["A", "B"], 2, &[0, 0]), ChargeLabel::new(0, 2)).unwrap();
        let rel = reduce_to_frame(&p0, &"A".into(), GroupElement::zero(2)).unwrap();
        assert_eq!(rel.state().systems(), systems(&["B"]).as_slice());
        assert!((rel.state().amplitude(&[0]) - 1.0).norm() < 1e-15);
        assert!((rel.conditional_norm() - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn reductions_at_different_origins_are_translates() {
        let n = 4;
        let p = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = StateVector::random(systems(&["A", "B", "C"]), n, &mut rng).unwrap();
        let (phys, _) = sector_project(&KinematicalState::new(s).unwrap(), ChargeLabel::new(p, n)).unwrap();
        let a = SystemId::from("A");
        let r0 = reduce_to_frame(&phys, &a, GroupElement::new(1, n)).unwrap();
        let r1 = reduce_to_frame(&phys, &a, GroupElement::new(3, n)).unwrap();
        let moved = r0
            .state()
            .translated(&systems(&["B", "C"]), 2)
            .unwrap()
            .scaled(omega_pow(n, -(1 - 3) * p));
        assert!(moved.max_abs_diff(r1.state()).unwrap() < 1e-12);
        assert!((r0.conditional_norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn frame_jump_commutes_with_reduction() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (a, c) = (SystemId::from("A"), SystemId::from("C"));
        for p in 0..n as i64 {
            let s = StateVector::random(systems(&["A", "B", "C"]), n, &mut rng).unwrap();
            let (phys, _) = sector_project(&KinematicalState::new(s).unwrap(), ChargeLabel::new(p, n)).unwrap();
            let x = GroupElement::new(p + 1, n);
            let z = GroupElement::new(2, n);
            let jumped = frame_jump(&reduce_to_frame(&phys, &a, x).unwrap(), &c, z).unwrap();
            let direct = reduce_to_frame(&phys, &c, z).unwrap();
            assert!(jumped.state().max_abs_diff(direct.state()).unwrap() < 1e-12);
            let back = frame_jump(&jumped, &a, x).unwrap();
            assert!(back.state().max_abs_diff(reduce_to_frame(&phys, &a, x).unwrap().state()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn lift_inverts_reduction() {
        let n = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = StateVector::random(systems(&["A", "B", "C"]), n, &mut rng).unwrap();
        let (phys, _) = sector_project(&KinematicalState::new(s).unwrap(), ChargeLabel::new(2, n)).unwrap();
        let rel = reduce_to_frame(&phys, &"A".into(), GroupElement::new(3, n)).unwrap();
        let lifted = rel.lift().unwrap();
        assert!((lifted.state().inner(phys.state()).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn twirl_examples() {
        let n = 4;
        let (a, c) = (SystemId::from("A"), SystemId::from("C"));
        let sector = ChargeLabel::new(1, n);
        let rel_clock = clock(&c, n, 1).tensor(&clock(&a, n, -1)).unwrap();
        let tw = incoherent_twirl(&rel_clock, sector).unwrap();
        assert!(tw.max_abs_diff(&rel_clock).unwrap() < 1e-14);
        let single = clock(&c, n, 1).embed(&[a.clone(), c.clone()]).unwrap();
        assert!(incoherent_twirl(&single, sector).unwrap().max_abs() < 1e-14);
        assert!(translation_defect(&tw) < 1e-14);
    }

    #[test]
    fn relational_clock_is_relative_position() {
        let n = 5;
        let (a, c) = (SystemId::from("A"), SystemId::from("C"));
        let f = relational_observable(&clock(&c, n, 1), &a, GroupElement::zero(n), ChargeLabel::new(2, n)).unwrap();
        let expected = clock(&c, n, 1).tensor(&clock(&a, n, -1)).unwrap();
        assert!(f.max_abs_diff(&expected).unwrap() < 1e-14);
    }

    #[test]
    fn relational_expectation_reproduces_relative_expectation() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = StateVector::random(systems(&["A", "B", "C"]), n, &mut rng).unwrap();
        let (phys, _) = sector_project(&KinematicalState::new(s).unwrap(), ChargeLabel::new(1, n)).unwrap();
        let a = SystemId::from("A");
        let x = GroupElement::new(2, n);
        let rel = reduce_to_frame(&phys, &a, x).unwrap();
        let o = clock(&"B".into(), n, 1).tensor(&clock(&"C".into(), n, 2)).unwrap();
        let via_branches = relational_expectation(&phys, &a, x, &o).unwrap();
        let via_operator = relational_observable(&o, &a, x, phys.sector()).unwrap().expectation(phys.state()).unwrap();
        let direct = o.expectation(rel.state()).unwrap();
        assert!((via_branches - direct).norm() < 1e-12);
        assert!((via_operator - direct).norm() < 1e-12);
    }

    #[test]
    fn d_embedding_on_random_states() {
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in 0..n as i64 {
            let s = StateVector::random(systems(&["A", "B", "C"]), n, &mut rng).unwrap();
            let r = d_embedding_pipeline(&KinematicalState::new(s).unwrap(), ChargeLabel::new(p, n), &"A".into(), GroupElement::zero(n))
                .unwrap();
            assert!(r.fidelity > 1.0 - 1e-10, "{r:?}");
            assert!((r.d_purity - 1.0).abs() < 1e-10);
            assert!((r.weight_three_party - r.weight_four_party).abs() < 1e-12);
        }
    }
}
