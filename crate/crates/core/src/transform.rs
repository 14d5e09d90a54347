//! Frame-change unitaries: parity swap, charged controlled translations,
//! the extended transformation `Ŝ^P` in perspectival and perspective-neutral
//! form, and its generalization `Ŝ^f` by a phase table.
//!
//! Registry convention for a change from frame `source` to frame `target`:
//! the unitary maps `spectators ++ [target]` to `[source] ++ spectators`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{dft, omega_pow, reduce, ChargeLabel, GroupElement};
use crate::hilbert::{DenseOperator, StateVector, SystemId};

/// Residual tolerance for the identities checked in this module.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

/// Deliberate construction errors, used to check that the verification
/// suites notice them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    #[default]
    None,
    /// Parity swap that forgets to negate positions.
    ParitySign,
}

/// Phase table `f: Z_N → ℝ` (radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseFunction {
    table: Vec<f64>,
}

impl PhaseFunction {
    pub fn new(table: Vec<f64>) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::Configuration("phase table needs at least two entries".into()));
        }
        if let Some(bad) = table.iter().find(|v| !v.is_finite()) {
            return Err(Error::Configuration(format!("phase table contains non-finite value {bad}")));
        }
        Ok(Self { table })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new((0..n).map(f).collect())
    }

    /// `f(x) = 2π·c·x/N`, whose exponential is the character of charge `c`.
    pub fn linear(n: usize, c: i64) -> Self {
        Self::from_fn(n, |x| TAU * (c * x as i64) as f64 / n as f64).expect("finite table")
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::from_fn(n, |_| value)
    }

    pub fn modulus(&self) -> usize {
        self.table.len()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn eval(&self, x: i64) -> f64 {
        self.table[reduce(x, self.modulus())]
    }

    pub fn exp_i(&self, x: i64) -> Complex64 {
        Complex64::from_polar(1.0, self.eval(x))
    }
}

/// A constructed frame change together with its metadata.
#[derive(Debug, Clone)]
pub struct FrameChange {
    pub source: SystemId,
    pub target: SystemId,
    pub sector: ChargeLabel,
    pub origins: (GroupElement, GroupElement),
    pub spectators: Vec<SystemId>,
    pub phase: Option<PhaseFunction>,
    pub unitary: DenseOperator,
}

impl FrameChange {
    pub fn modulus(&self) -> usize {
        self.unitary.modulus()
    }

    /// Registry the unitary acts on: `spectators ++ [target]`.
    pub fn input_registry(&self) -> Vec<SystemId> {
        let mut r = self.spectators.clone();
        r.push(self.target.clone());
        r
    }

    /// Registry the unitary produces: `[source] ++ spectators`.
    pub fn output_registry(&self) -> Vec<SystemId> {
        let mut r = vec![self.source.clone()];
        r.extend(self.spectators.iter().cloned());
        r
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        self.unitary.apply(state)
    }

    /// The frame change in the opposite direction, built from scratch.
    pub fn reverse(&self) -> Result<FrameChange> {
        let (x, z) = self.origins;
        match &self.phase {
            Some(f) => build_s_f(&self.target, &self.source, &self.spectators, f),
            None => build_s_p_xz(&self.target, &self.source, &self.spectators, self.sector, z, x),
        }
    }
}

/// `|x⟩ ↦ |x + s⟩` on one system.
pub fn shift(system: &SystemId, n: usize, s: i64) -> DenseOperator {
    DenseOperator::from_monomial(vec![system.clone()], vec![system.clone()], n, |d| {
        (vec![reduce(d[0] as i64 + s, n)], Complex64::new(1.0, 0.0))
    })
    .expect("single-system monomial")
}

/// Clock operator `ω^{power·x̂}` on one system.
pub fn clock(system: &SystemId, n: usize, power: i64) -> DenseOperator {
    DenseOperator::diagonal(vec![system.clone()], n, |d| omega_pow(n, power * d[0] as i64)).expect("diagonal")
}

/// Unitary DFT matrix `F[k, y] = N^{-1/2} ω^{-ky}`, built column by column
/// from the FFT.
pub fn dft_matrix(n: usize) -> DMatrix<Complex64> {
    let mut f = DMatrix::zeros(n, n);
    for y in 0..n {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[y] = Complex64::new(1.0, 0.0);
        for (k, v) in dft(&e).into_iter().enumerate() {
            f[(k, y)] = v;
        }
    }
    f
}

/// `g(k̂)` on one system, diagonalized in the momentum basis.
pub fn momentum_function(system: &SystemId, n: usize, g: impl Fn(usize) -> Complex64) -> DenseOperator {
    let f = dft_matrix(n);
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, (0..n).map(g)));
    DenseOperator::local(system.clone(), n, f.adjoint() * diag * f).expect("local operator")
}

/// `ω^{power·k̂}` on one system.
pub fn momentum_exp(system: &SystemId, n: usize, power: i64) -> DenseOperator {
    momentum_function(system, n, |k| omega_pow(n, power * k as i64))
}

/// Integer momentum-label operator `k̂` (labels `0..N`).
pub fn momentum_label(system: &SystemId, n: usize) -> DenseOperator {
    momentum_function(system, n, |k| Complex64::new(k as f64, 0.0))
}

/// `|x⟩_c ↦ |−x⟩_a`; the `c` system is relabelled `a`.
pub fn parity_swap(a: &SystemId, c: &SystemId, n: usize) -> DenseOperator {
    parity_swap_with_fault(a, c, n, Fault::None)
}

pub fn parity_swap_with_fault(a: &SystemId, c: &SystemId, n: usize, fault: Fault) -> DenseOperator {
    let sign = match fault {
        Fault::None => -1,
        Fault::ParitySign => 1,
    };
    DenseOperator::from_monomial(vec![c.clone()], vec![a.clone()], n, |d| {
        (vec![reduce(sign * d[0] as i64, n)], Complex64::new(1.0, 0.0))
    })
    .expect("single-system monomial")
}

/// `|x⟩_control |y⟩_targets ↦ ω^{−x·P} |x⟩ |y − x⟩` on the registry
/// `[control] ++ targets`.
pub fn controlled_translation(
    control: &SystemId,
    targets: &[SystemId],
    sector: ChargeLabel,
    n: usize,
) -> Result<DenseOperator> {
    if targets.contains(control) {
        return Err(Error::Composition(format!("control {control} is also a target")));
    }
    let mut reg = vec![control.clone()];
    reg.extend(targets.iter().cloned());
    let p = sector.value() as i64;
    DenseOperator::from_monomial(reg.clone(), reg, n, |d| {
        let x = d[0] as i64;
        let mut out = vec![d[0]];
        out.extend(d[1..].iter().map(|&y| reduce(y as i64 - x, n)));
        (out, omega_pow(n, -x * p))
    })
}

/// Charged representation `T^P(x)`: every listed system shifted by `+x`,
/// times `ω^{P·x}`. Composes as `T^P(x)T^P(y) = T^P(x + y)`.
pub fn charged_translation_rep(systems: &[SystemId], sector: ChargeLabel, x: GroupElement) -> Result<DenseOperator> {
    let n = x.modulus();
    if sector.modulus() != n {
        return Err(Error::ModulusMismatch { left: sector.modulus(), right: n });
    }
    let s = x.value() as i64;
    let phase = omega_pow(n, sector.value() as i64 * s);
    DenseOperator::from_monomial(systems.to_vec(), systems.to_vec(), n, |d| {
        (d.iter().map(|&y| reduce(y as i64 + s, n)).collect(), phase)
    })
}

/// Total translation `U(x) = e^{ixP̂}`, which shifts every system by `−x`.
pub fn total_translation(systems: &[SystemId], n: usize, x: i64) -> DenseOperator {
    charged_translation_rep(systems, ChargeLabel::new(0, n), GroupElement::new(-x, n)).expect("matching moduli")
}

/// `U^P(x) = T^P(−x) = e^{ix(P̂ − P)}`.
pub fn charged_total_translation(systems: &[SystemId], sector: ChargeLabel, x: i64) -> Result<DenseOperator> {
    charged_translation_rep(systems, sector, GroupElement::new(-x, sector.modulus()))
}

fn check_labels(source: &SystemId, target: &SystemId, spectators: &[SystemId]) -> Result<()> {
    let mut all = vec![source.clone(), target.clone()];
    all.extend(spectators.iter().cloned());
    crate::hilbert::ensure_distinct(&all)
}

/// `Ŝ^P_{source→target}` as the product of the parity swap with the charged
/// controlled translation: `|y⟩|z⟩ ↦ ω^{−zP} |−z⟩_source |y − z⟩`.
pub fn build_s_p(source: &SystemId, target: &SystemId, spectators: &[SystemId], sector: ChargeLabel) -> Result<FrameChange> {
    build_s_p_with_fault(source, target, spectators, sector, Fault::None)
}

pub fn build_s_p_with_fault(
    source: &SystemId,
    target: &SystemId,
    spectators: &[SystemId],
    sector: ChargeLabel,
    fault: Fault,
) -> Result<FrameChange> {
    check_labels(source, target, spectators)?;
    let n = sector.modulus();
    let mut input = spectators.to_vec();
    input.push(target.clone());
    let ct = controlled_translation(target, spectators, sector, n)?.reordered_square(&input)?;
    let parity = parity_swap_with_fault(source, target, n, fault);
    let parity = if spectators.is_empty() {
        parity
    } else {
        parity.tensor(&DenseOperator::identity(spectators.to_vec(), n))?
    };
    let unitary = parity.compose(&ct)?;
    let mut output = vec![source.clone()];
    output.extend(spectators.iter().cloned());
    Ok(FrameChange {
        source: source.clone(),
        target: target.clone(),
        sector,
        origins: (GroupElement::zero(n), GroupElement::zero(n)),
        spectators: spectators.to_vec(),
        phase: None,
        unitary: unitary.reordered(&input, &output)?,
    })
}

/// Perspective-neutral form
/// `Σ_z |X+Z−z⟩_source⟨z|_target ⊗ ω^{(z−Z)(k̂ − P)}`, with `k̂` the total
/// spectator momentum, each exponential built in the momentum basis.
pub fn build_s_p_xz(
    source: &SystemId,
    target: &SystemId,
    spectators: &[SystemId],
    sector: ChargeLabel,
    x: GroupElement,
    z: GroupElement,
) -> Result<FrameChange> {
    check_labels(source, target, spectators)?;
    let n = sector.modulus();
    if x.modulus() != n || z.modulus() != n {
        return Err(Error::ModulusMismatch { left: n, right: x.modulus().max(z.modulus()) });
    }
    let (xv, zv, p) = (x.value() as i64, z.value() as i64, sector.value() as i64);
    let mut input = spectators.to_vec();
    input.push(target.clone());
    let mut output = vec![source.clone()];
    output.extend(spectators.iter().cloned());

    let d = n.pow(input.len() as u32);
    let mut total = DenseOperator::new(input.clone(), output.clone(), n, DMatrix::zeros(d, d))?;
    for zz in 0..n as i64 {
        let mut outer = DMatrix::zeros(n, n);
        outer[(reduce(xv + zv - zz, n), zz as usize)] = omega_pow(n, -(zz - zv) * p);
        let mut block = DenseOperator::new(vec![target.clone()], vec![source.clone()], n, outer)?;
        for s in spectators {
            block = block.tensor(&momentum_exp(s, n, zz - zv))?;
        }
        total = total.linear_combination(Complex64::new(1.0, 0.0), &block, Complex64::new(1.0, 0.0))?;
    }
    Ok(FrameChange {
        source: source.clone(),
        target: target.clone(),
        sector,
        origins: (x, z),
        spectators: spectators.to_vec(),
        phase: None,
        unitary: total.reordered(&input, &output)?,
    })
}

/// `Ŝ^f = 𝒫 e^{ix̂_target p̂} e^{if(x̂_target)}`:
/// `|y⟩|z⟩ ↦ e^{if(z)} |−z⟩_source |y − z⟩`.
///
/// The linear table `f(x) = 2πcx/N` reproduces `Ŝ^P` at sector `P = −c`.
pub fn build_s_f(source: &SystemId, target: &SystemId, spectators: &[SystemId], f: &PhaseFunction) -> Result<FrameChange> {
    check_labels(source, target, spectators)?;
    let n = f.modulus();
    let standard = build_s_p(source, target, spectators, ChargeLabel::new(0, n))?;
    let mut input = spectators.to_vec();
    input.push(target.clone());
    let phase = DenseOperator::diagonal(vec![target.clone()], n, |d| f.exp_i(d[0] as i64))?.embed(&input)?;
    let unitary = standard.unitary.compose(&phase)?;
    Ok(FrameChange { phase: Some(f.clone()), ..standard }.with_unitary(unitary))
}

impl FrameChange {
    fn with_unitary(mut self, unitary: DenseOperator) -> Self {
        self.unitary = unitary;
        self
    }
}

/// Outcome of a matrix identity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub holds: bool,
    pub residual: f64,
}

impl IdentityCheck {
    pub fn from_residual(residual: f64, tol: f64) -> Self {
        Self { holds: residual < tol, residual }
    }
}

/// A family of frame changes, one per ordered pair of frames.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameFamily {
    Sector(ChargeLabel),
    Phase(PhaseFunction),
}

impl FrameFamily {
    pub fn modulus(&self) -> usize {
        match self {
            FrameFamily::Sector(p) => p.modulus(),
            FrameFamily::Phase(f) => f.modulus(),
        }
    }

    pub fn build(&self, source: &SystemId, target: &SystemId, spectators: &[SystemId]) -> Result<FrameChange> {
        self.build_with_fault(source, target, spectators, Fault::None)
    }

    pub fn build_with_fault(
        &self,
        source: &SystemId,
        target: &SystemId,
        spectators: &[SystemId],
        fault: Fault,
    ) -> Result<FrameChange> {
        match self {
            FrameFamily::Sector(p) => build_s_p_with_fault(source, target, spectators, *p, fault),
            FrameFamily::Phase(f) => build_s_f(source, target, spectators, f),
        }
    }
}

/// `Ŝ_{2→3} Ŝ_{1→2} = Ŝ_{1→3}` on three frames.
pub fn check_transitivity(family: &FrameFamily) -> Result<IdentityCheck> {
    check_transitivity_with_fault(family, Fault::None)
}

pub fn check_transitivity_with_fault(family: &FrameFamily, fault: Fault) -> Result<IdentityCheck> {
    let [f1, f2, f3]: [SystemId; 3] = ["1", "2", "3"].map(SystemId::from);
    let s12 = family.build_with_fault(&f1, &f2, std::slice::from_ref(&f3), fault)?;
    let s23 = family.build_with_fault(&f2, &f3, std::slice::from_ref(&f1), fault)?;
    let s13 = family.build_with_fault(&f1, &f3, std::slice::from_ref(&f2), fault)?;
    let composite = s23.unitary.compose(&s12.unitary)?;
    Ok(IdentityCheck::from_residual(composite.max_abs_diff(&s13.unitary)?, IDENTITY_TOLERANCE))
}

/// Unitarity together with `Ŝ† = Ŝ_reverse`; the residual is the larger of
/// the two defects.
pub fn check_unitarity_inverse(fc: &FrameChange) -> Result<IdentityCheck> {
    let reverse = fc.reverse()?;
    let inverse_defect = fc.unitary.adjoint().max_abs_diff(&reverse.unitary)?;
    let residual = inverse_defect.max(fc.unitary.unitarity_defect());
    Ok(IdentityCheck::from_residual(residual, IDENTITY_TOLERANCE))
}

/// Verdict on a phase table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PhaseClass {
    /// `e^{if(x)} = ω^{cx}`; the resulting frame change is `Ŝ^P` at sector
    /// `−c`.
    Admissible { exponent: ChargeLabel, sector: ChargeLabel },
    Inadmissible { fails_transitivity: bool, fails_unitarity: bool },
}

impl PhaseClass {
    pub fn is_admissible(&self) -> bool {
        matches!(self, PhaseClass::Admissible { .. })
    }
}

/// Admissible exactly when `e^{if}` is a character of `Z_N`: fit the
/// exponent from `f(1)` and check every point.
pub fn classify_admissible_phase(f: &PhaseFunction) -> PhaseClass {
    let n = f.modulus();
    let c = (f.eval(1) * n as f64 / TAU).round() as i64;
    let is_character = (0..n as i64).all(|x| (f.exp_i(x) - omega_pow(n, c * x)).norm() < IDENTITY_TOLERANCE);
    if is_character {
        return PhaseClass::Admissible { exponent: ChargeLabel::new(c, n), sector: ChargeLabel::new(-c, n) };
    }
    // e^{if(y−x)} e^{if(x)} = e^{if(y)} is the character equation, so any
    // non-character violates it
    let fails_transitivity = (0..n as i64)
        .flat_map(|x| (0..n as i64).map(move |y| (x, y)))
        .any(|(x, y)| (f.exp_i(y - x) * f.exp_i(x) - f.exp_i(y)).norm() >= IDENTITY_TOLERANCE);
    let fails_unitarity = (0..n as i64).any(|x| (f.exp_i(-x) * f.exp_i(x) - 1.0).norm() >= IDENTITY_TOLERANCE);
    PhaseClass::Inadmissible { fails_transitivity, fails_unitarity }
}

/// Residuals of the canonical-variable transport identities for
/// `Ŝ^P_{A→C}` with spectator `B`, in clock form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportResiduals {
    /// `ω^{x̂_B} ↦ ω^{x̂_B − x̂_A}`
    pub position_b: f64,
    /// `ω^{x̂_C} ↦ ω^{−x̂_A}`
    pub position_c: f64,
    /// `ω^{k̂_B} ↦ ω^{k̂_B}`
    pub momentum_b: f64,
    /// `ω^{k̂_C} ↦ ω^{−(k̂_A + k̂_B) + P}`
    pub momentum_c: f64,
}

impl TransportResiduals {
    pub fn max(&self) -> f64 {
        self.position_b.max(self.position_c).max(self.momentum_b).max(self.momentum_c)
    }
}

pub fn canonical_transport(sector: ChargeLabel) -> Result<TransportResiduals> {
    canonical_transport_with_fault(sector, Fault::None)
}

pub fn canonical_transport_with_fault(sector: ChargeLabel, fault: Fault) -> Result<TransportResiduals> {
    let n = sector.modulus();
    let [a, b, c]: [SystemId; 3] = ["A", "B", "C"].map(SystemId::from);
    let s = build_s_p_with_fault(&a, &c, std::slice::from_ref(&b), sector, fault)?;
    let input = s.input_registry();
    let output = s.output_registry();
    let transported = |op: DenseOperator| -> Result<DenseOperator> {
        op.embed(&input)?.conjugated_by(&s.unitary)
    };
    let expect = |op: DenseOperator| op.embed(&output);

    let position_b = transported(clock(&b, n, 1))?
        .max_abs_diff(&expect(clock(&b, n, 1).tensor(&clock(&a, n, -1))?)?)?;
    let position_c = transported(clock(&c, n, 1))?.max_abs_diff(&expect(clock(&a, n, -1))?)?;
    let momentum_b = transported(momentum_exp(&b, n, 1))?.max_abs_diff(&expect(momentum_exp(&b, n, 1))?)?;
    let rhs = momentum_exp(&a, n, -1)
        .tensor(&momentum_exp(&b, n, -1))?
        .scaled(omega_pow(n, sector.value() as i64));
    let momentum_c = transported(momentum_exp(&c, n, 1))?.max_abs_diff(&expect(rhs)?)?;
    Ok(TransportResiduals { position_b, position_c, momentum_b, momentum_c })
}

/// Single-system momentum eigenstate with label `label`.
pub fn momentum_state(system: &SystemId, n: usize, label: i64) -> StateVector {
    StateVector::momentum(system.clone(), n, label)
}

/// `‖Ŝ⁰_{A→C}(ψ ⊗ |−P⟩_D) − (Ŝ^P_{A→C} ψ) ⊗ |−P⟩_D‖_max` for a state `ψ` on
/// `[B, C]` (relative to `A`).
pub fn d_embedding_residual(psi: &StateVector, sector: ChargeLabel) -> Result<f64> {
    let n = sector.modulus();
    let [a, b, c, d]: [SystemId; 4] = ["A", "B", "C", "D"].map(SystemId::from);
    let d_state = momentum_state(&d, n, -(sector.value() as i64));
    let s0 = build_s_p(&a, &c, &[b.clone(), d.clone()], ChargeLabel::new(0, n))?;
    let sp = build_s_p(&a, &c, std::slice::from_ref(&b), sector)?;
    let lhs = s0.apply(&psi.tensor(&d_state)?)?;
    let rhs = sp.apply(psi)?.tensor(&d_state)?;
    lhs.max_abs_diff(&rhs)
}
