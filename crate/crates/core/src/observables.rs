//! Which observables survive a frame change, and in which charge sectors.
//!
//! Continuum commutation conditions with `x̂` are transcribed as
//! conjugation by the diagonal phase `D_P = diag(ω^{−Px})`: an operator
//! commutes with `x̂` exactly when every such conjugation fixes it.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{omega_pow, ChargeLabel};
use crate::hilbert::{operator_schmidt_decompose, DenseOperator, SystemId};
use crate::transform::{build_s_p, clock, controlled_translation, momentum_function, parity_swap, shift, FrameChange};

/// Residuals below this count as invariance.
pub const INVARIANCE_TOLERANCE: f64 = 1e-9;

/// `‖S O S† − Π O Π†‖_max` for `O` on the frame change's input registry,
/// where `Π` is the parity swap of source and target.
pub fn invariance_test(op: &DenseOperator, fc: &FrameChange) -> Result<f64> {
    let input = fc.input_registry();
    let output = fc.output_registry();
    if !op.is_square_registry() || !crate::hilbert::same_registry(op.in_systems(), &input) {
        return Err(Error::Composition(format!(
            "observable registry does not match the frame change input {:?}",
            input.iter().map(|s| s.label()).collect::<Vec<_>>()
        )));
    }
    let n = fc.modulus();
    let transformed = op.conjugated_by(&fc.unitary)?;
    let mut parity = parity_swap(&fc.source, &fc.target, n);
    if !fc.spectators.is_empty() {
        parity = parity.tensor(&DenseOperator::identity(fc.spectators.clone(), n))?;
    }
    let swapped = op.conjugated_by(&parity)?.reordered_square(&output)?;
    transformed.max_abs_diff(&swapped)
}

/// `D_P = diag(ω^{−Px})` on one system.
pub fn sector_phase(system: &SystemId, sector: ChargeLabel) -> DenseOperator {
    clock(system, sector.modulus(), -(sector.value() as i64))
}

/// Per-term commutation record of a Schmidt decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermCommutation {
    pub term: usize,
    pub coefficient: f64,
    /// Indexed by sector label: whether `D_P` conjugation fixes the target
    /// factor.
    pub commutes_with_phase: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    /// Sectors predicted invariant from the per-term commutation test.
    pub invariant_sectors: Vec<ChargeLabel>,
    pub s0_invariant: bool,
    pub per_term_commutation: Vec<TermCommutation>,
    /// Direct invariance residual for every sector.
    pub residuals: BTreeMap<usize, f64>,
    /// Sectors whose direct residual is below tolerance.
    pub brute_force_sectors: Vec<ChargeLabel>,
}

impl InvarianceReport {
    /// The commutation criterion and the direct test pick the same sectors.
    pub fn biconditional_agrees(&self) -> bool {
        self.invariant_sectors == self.brute_force_sectors
    }
}

/// Splits `O` across `spectators | target`, tests each target factor
/// against `D_P`, and compares the predicted sectors with direct checks.
pub fn theorem1_classify(
    op: &DenseOperator,
    source: &SystemId,
    target: &SystemId,
    spectators: &[SystemId],
) -> Result<InvarianceReport> {
    if !op.is_hermitian(1e-10) {
        return Err(Error::Contract("invariance classification needs a Hermitian observable".into()));
    }
    let n = op.modulus();
    let frame_changes: Vec<FrameChange> = ChargeLabel::all(n)
        .map(|p| build_s_p(source, target, spectators, p))
        .collect::<Result<_>>()?;
    let s0_residual = invariance_test(op, &frame_changes[0])?;
    let s0_invariant = s0_residual < INVARIANCE_TOLERANCE;
    if !s0_invariant {
        return Ok(InvarianceReport {
            invariant_sectors: Vec::new(),
            s0_invariant,
            per_term_commutation: Vec::new(),
            residuals: BTreeMap::from([(0, s0_residual)]),
            brute_force_sectors: Vec::new(),
        });
    }

    let terms = operator_schmidt_decompose(op, spectators)?;
    let phases: Vec<DenseOperator> = ChargeLabel::all(n).map(|p| sector_phase(target, p)).collect();
    let per_term_commutation: Vec<TermCommutation> = terms
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let commutes_with_phase = phases
                .iter()
                .map(|d| {
                    let moved = t.right.conjugated_by(d).expect("local conjugation");
                    moved.max_abs_diff(&t.right).expect("same registry") < INVARIANCE_TOLERANCE
                })
                .collect();
            TermCommutation { term: k, coefficient: t.coefficient, commutes_with_phase }
        })
        .collect();
    let invariant_sectors = ChargeLabel::all(n)
        .filter(|p| per_term_commutation.iter().all(|t| t.commutes_with_phase[p.value()]))
        .collect();

    let mut residuals = BTreeMap::new();
    let mut brute_force_sectors = Vec::new();
    for fc in &frame_changes {
        let r = invariance_test(op, fc)?;
        residuals.insert(fc.sector.value(), r);
        if r < INVARIANCE_TOLERANCE {
            brute_force_sectors.push(fc.sector);
        }
    }
    Ok(InvarianceReport { invariant_sectors, s0_invariant, per_term_commutation, residuals, brute_force_sectors })
}

/// Product-observable classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductClass {
    /// `T O_B T† = O_B` and `Z O_C Z† = O_C`.
    Case1Commuting,
    /// `T O_B T = O_B` and `Z O_C Z = O_C`.
    Case2Anticommuting,
    /// Invariant under the standard change yet in neither case. Absent in
    /// the continuum; it does occur on `Z_N`.
    MixedInvalid,
    NotS0Invariant,
}

fn hs_normalized(op: &DenseOperator) -> Result<DenseOperator> {
    let norm = op.hs_norm();
    if norm < 1e-300 {
        return Err(Error::Contract("zero operator cannot be normalized".into()));
    }
    Ok(op.scaled(Complex64::new(1.0 / norm, 0.0)))
}

/// Classifies `O_B ⊗ O_C` against the standard change `A → C`.
pub fn proposition1_classify(o_b: &DenseOperator, o_c: &DenseOperator) -> Result<ProductClass> {
    let (b, c) = match (o_b.in_systems(), o_c.in_systems()) {
        ([b], [c]) if o_b.is_square_registry() && o_c.is_square_registry() => (b.clone(), c.clone()),
        _ => return Err(Error::Composition("product classification needs single-system factors".into())),
    };
    let n = o_b.modulus();
    let (o_b, o_c) = (hs_normalized(o_b)?, hs_normalized(o_c)?);
    let fc = build_s_p(&SystemId::from("A"), &c, std::slice::from_ref(&b), ChargeLabel::new(0, n))?;
    if invariance_test(&o_b.tensor(&o_c)?, &fc)? >= INVARIANCE_TOLERANCE {
        return Ok(ProductClass::NotS0Invariant);
    }
    let t = shift(&b, n, 1);
    let z = clock(&c, n, 1);
    let close = |x: DenseOperator, y: &DenseOperator| x.max_abs_diff(y).map(|r| r < INVARIANCE_TOLERANCE);
    let case1 = close(o_b.conjugated_by(&t)?, &o_b)? && close(o_c.conjugated_by(&z)?, &o_c)?;
    if case1 {
        return Ok(ProductClass::Case1Commuting);
    }
    let case2 = close(t.compose(&o_b)?.compose(&t)?, &o_b)? && close(z.compose(&o_c)?.compose(&z)?, &o_c)?;
    Ok(if case2 { ProductClass::Case2Anticommuting } else { ProductClass::MixedInvalid })
}

/// Position parity `|x⟩ ↦ |−x⟩` on one system.
pub fn parity(system: &SystemId, n: usize) -> DenseOperator {
    DenseOperator::from_monomial(vec![system.clone()], vec![system.clone()], n, |d| {
        (vec![crate::group::reduce(-(d[0] as i64), n)], Complex64::new(1.0, 0.0))
    })
    .expect("single-system monomial")
}

/// Residuals of the relative-distance example on four systems with
/// `Ŝ^P_{A→C}` and spectators `B, D`, indexed by sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeDistanceReport {
    /// Invariance residual of `ω^{x̂_B − x̂_D}`.
    pub spectator_pair: Vec<f64>,
    /// Invariance residual of `ω^{x̂_B − x̂_C}`.
    pub frame_pair: Vec<f64>,
    /// `‖S ω^{x̂_B − x̂_C} S† − ω^{x̂_B}‖_max`.
    pub frame_pair_to_spectator_clock: Vec<f64>,
}

pub fn relative_distance_demo(n: usize) -> Result<RelativeDistanceReport> {
    let [a, b, c, d] = ["A", "B", "C", "D"].map(SystemId::from);
    let spectators = [b.clone(), d.clone()];
    let mut report = RelativeDistanceReport {
        spectator_pair: Vec::new(),
        frame_pair: Vec::new(),
        frame_pair_to_spectator_clock: Vec::new(),
    };
    for p in ChargeLabel::all(n) {
        let fc = build_s_p(&a, &c, &spectators, p)?;
        let input = fc.input_registry();
        let bd = clock(&b, n, 1).tensor(&clock(&d, n, -1))?.embed(&input)?;
        let bc = clock(&b, n, 1).tensor(&clock(&c, n, -1))?.embed(&input)?;
        report.spectator_pair.push(invariance_test(&bd, &fc)?);
        report.frame_pair.push(invariance_test(&bc, &fc)?);
        let moved = bc.conjugated_by(&fc.unitary)?;
        report.frame_pair_to_spectator_clock.push(moved.max_abs_diff(&clock(&b, n, 1).embed(&fc.output_registry())?)?);
    }
    Ok(report)
}

/// Parameters of the Hamiltonian demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSetup {
    pub n: usize,
    /// Potential `V` as a real table on `Z_N`.
    pub potential: Vec<f64>,
    pub mass_s: f64,
    pub mass_r: f64,
    pub include_frame_kinetic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianReport {
    /// `‖Ŝ^P H^{(M)} Ŝ^P† − H^{(R)}‖_max` per sector.
    pub covariance_residuals: Vec<f64>,
    /// `‖Ŝ^P H Ŝ^P† − Ŝ⁰ H Ŝ⁰†‖_max` per sector.
    pub sector_dependence: Vec<f64>,
    /// Literal invariance residual `‖S H S† − Π H Π†‖_max` per sector.
    pub literal_residuals: Vec<f64>,
}

impl HamiltonianReport {
    pub fn covariant_sectors(&self) -> Vec<usize> {
        (0..self.covariance_residuals.len()).filter(|&p| self.covariance_residuals[p] < INVARIANCE_TOLERANCE).collect()
    }
}

fn kinetic(system: &SystemId, n: usize, mass: f64) -> DenseOperator {
    momentum_function(system, n, |k| Complex64::new((k * k) as f64 / (2.0 * mass), 0.0))
}

/// Compares `H^{(M)} = k̂_S²/2m_S + m_S V(x̂_S) [+ k̂_R²/2m_R + m_R V(x̂_R)]`
/// transported to `R` with the same law written relative to `R`,
/// `H^{(R)} = k̂_S²/2m_S + m_S V(x̂_S − x̂_M) [+ m_R V(−x̂_M)]`.
pub fn hamiltonian_covariance_demo(setup: &HamiltonianSetup) -> Result<HamiltonianReport> {
    let n = setup.n;
    if setup.potential.len() != n {
        return Err(Error::Configuration(format!("potential has {} entries, expected {n}", setup.potential.len())));
    }
    let [m, r, s] = ["M", "R", "S"].map(SystemId::from);
    let v = |x: i64| setup.potential[crate::group::reduce(x, n)];
    let input = vec![s.clone(), r.clone()];
    let output = vec![m.clone(), s.clone()];
    let real = |x: f64| Complex64::new(x, 0.0);
    let one = real(1.0);

    let mut h_m = kinetic(&s, n, setup.mass_s).embed(&input)?.linear_combination(
        one,
        &DenseOperator::diagonal(input.clone(), n, |d| real(setup.mass_s * v(d[0] as i64)))?,
        one,
    )?;
    let mut h_r = kinetic(&s, n, setup.mass_s).embed(&output)?.linear_combination(
        one,
        &DenseOperator::diagonal(output.clone(), n, |d| real(setup.mass_s * v(d[1] as i64 - d[0] as i64)))?,
        one,
    )?;
    if setup.include_frame_kinetic {
        h_m = h_m
            .linear_combination(one, &kinetic(&r, n, setup.mass_r).embed(&input)?, one)?
            .linear_combination(one, &DenseOperator::diagonal(input.clone(), n, |d| real(setup.mass_r * v(d[1] as i64)))?, one)?;
        h_r = h_r.linear_combination(
            one,
            &DenseOperator::diagonal(output.clone(), n, |d| real(setup.mass_r * v(-(d[0] as i64))))?,
            one,
        )?;
    }

    let standard = build_s_p(&m, &r, std::slice::from_ref(&s), ChargeLabel::new(0, n))?;
    let h_standard = h_m.conjugated_by(&standard.unitary)?;
    let mut report = HamiltonianReport {
        covariance_residuals: Vec::new(),
        sector_dependence: Vec::new(),
        literal_residuals: Vec::new(),
    };
    for p in ChargeLabel::all(n) {
        let fc = build_s_p(&m, &r, std::slice::from_ref(&s), p)?;
        let moved = h_m.conjugated_by(&fc.unitary)?;
        report.covariance_residuals.push(moved.max_abs_diff(&h_r)?);
        report.sector_dependence.push(moved.max_abs_diff(&h_standard)?);
        report.literal_residuals.push(invariance_test(&h_m, &fc)?);
    }
    Ok(report)
}

/// Random Hermitian operator on `systems` with Gaussian entries.
pub fn random_hermitian(systems: Vec<SystemId>, n: usize, rng: &mut impl Rng) -> Result<DenseOperator> {
    let d = n.pow(systems.len() as u32);
    let g = DMatrix::from_fn(d, d, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let h = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    DenseOperator::square(systems, n, h)?.with_hermitian_flag()
}

/// Random Hermitian observable on `[spectator, target]` invariant under the
/// standard change (twirled over the controlled shift). With `extra` set it
/// is also twirled over `D_extra`, which makes it invariant in every
/// multiple of that sector.
pub fn random_s0_invariant(
    spectator: &SystemId,
    target: &SystemId,
    n: usize,
    extra: Option<ChargeLabel>,
    rng: &mut impl Rng,
) -> Result<DenseOperator> {
    let reg = vec![spectator.clone(), target.clone()];
    let h = random_hermitian(reg.clone(), n, rng)?;
    let v = controlled_translation(target, std::slice::from_ref(spectator), ChargeLabel::new(0, n), n)?
        .reordered_square(&reg)?;
    let mut generators = vec![v];
    if let Some(p) = extra {
        generators.push(sector_phase(target, p).embed(&reg)?);
    }
    let mut acc = h;
    for g in generators {
        acc = twirl_over_powers(&acc, &g, n)?;
    }
    acc.with_hermitian_flag()
}

/// `(1/N) Σ_j G^j O G^{−j}` for a generator with `G^N = 1`.
fn twirl_over_powers(op: &DenseOperator, g: &DenseOperator, n: usize) -> Result<DenseOperator> {
    let mut power = DenseOperator::identity(op.in_systems().to_vec(), n);
    let d = op.matrix().nrows();
    let mut acc = DenseOperator::square(op.in_systems().to_vec(), n, DMatrix::zeros(d, d))?;
    let w = Complex64::new(1.0 / n as f64, 0.0);
    for _ in 0..n {
        acc = acc.linear_combination(Complex64::new(1.0, 0.0), &op.conjugated_by(&power)?, w)?;
        power = g.compose(&power)?;
    }
    Ok(acc)
}

/// `{P : 2P ≡ 0 mod N}`, the sectors in which position parity survives.
pub fn parity_invariant_sectors(n: usize) -> Vec<usize> {
    (0..n).filter(|p| (2 * p) % n == 0).collect()
}

/// `ω^{−Px}` evaluated on a diagonal: helper for documenting `D_P`.
pub fn sector_phase_entry(n: usize, sector: usize, x: usize) -> Complex64 {
    omega_pow(n, -((sector * x) as i64))
}
