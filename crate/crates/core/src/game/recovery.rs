use std::collections::BTreeSet;
use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::group::{gcd, omega_pow, phase_to_steps, reduce, solve_congruence, wrap_phase, ChargeLabel, GroupElement};
use crate::hilbert::{partial_trace, StateVector, SystemId};
use crate::neutral::{frame_jump, reduce_to_frame, sector_project, sector_weights, KinematicalState, RelativeState};
use crate::transform::{build_s_p, momentum_state};

use super::config::{players, Method};
use super::levels::{extract_branch_phase, origin};

/// Phases must land this close to a multiple of `2π/N`.
pub const PHASE_TOLERANCE: f64 = 1e-6;

/// Process fits whose best and runner-up scores are closer than this are
/// indeterminate.
pub const PROCESS_MARGIN: f64 = 1e-6;

/// Sectors below this weight are treated as unpopulated.
const POPULATED: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Recovery {
    Unique(ChargeLabel),
    /// Every label consistent with the data, ascending.
    Candidates(Vec<ChargeLabel>),
}

impl Recovery {
    fn from_labels(labels: Vec<usize>, n: usize) -> Result<Self> {
        match labels.len() {
            0 => Err(Error::Indeterminate("no sector is consistent with the data".into())),
            1 => Ok(Recovery::Unique(ChargeLabel::new(labels[0] as i64, n))),
            _ => Ok(Recovery::Candidates(labels.into_iter().map(|p| ChargeLabel::new(p as i64, n)).collect())),
        }
    }

    pub fn labels(&self) -> Vec<ChargeLabel> {
        match self {
            Recovery::Unique(p) => vec![*p],
            Recovery::Candidates(c) => c.clone(),
        }
    }

    pub fn contains(&self, p: ChargeLabel) -> bool {
        self.labels().contains(&p)
    }
}

/// Solves `Φ_A − Φ_C ≡ P·separation·2π/N`, where `separation` is the change
/// of `C`'s position relative to `A` from the first branch to the second.
pub fn recover_from_phase_difference(phi_a: f64, phi_c: f64, separation: i64, n: usize) -> Result<Recovery> {
    let sep = reduce(separation, n);
    if sep == 0 {
        return Err(Error::DegenerateGeometry("the relative distance between the frames is the same in both branches".into()));
    }
    let (steps, residual) = phase_to_steps(phi_a - phi_c, n);
    if residual > PHASE_TOLERANCE {
        return Err(Error::Indeterminate(format!("phase difference is {residual:.2e} away from a multiple of 2π/N")));
    }
    Recovery::from_labels(solve_congruence(sep as i64, steps as i64, n), n)
}

/// Phase-difference recovery from the branch positions of both frames.
/// `Φ_A − Φ_C = P·((z2 − x2) − (z1 − x1))·2π/N`.
pub fn level3_recover_p_phase_difference(
    phi_a: f64,
    phi_c: f64,
    x1: GroupElement,
    x2: GroupElement,
    z1: GroupElement,
    z2: GroupElement,
) -> Result<Recovery> {
    let n = x1.modulus();
    if [x2, z1, z2].iter().any(|g| g.modulus() != n) {
        return Err(Error::ModulusMismatch { left: n, right: [x2, z1, z2].iter().map(|g| g.modulus()).find(|&m| m != n).unwrap() });
    }
    let v = |g: GroupElement| g.value() as i64;
    let separation = (v(z2) - v(x2)) - (v(z1) - v(x1));
    recover_from_phase_difference(phi_a, phi_c, separation, n)
}

/// Wave functions relative to `A` (`Φ_A(u, v)` over `B, C`) and relative to
/// `C` (`Φ_C(s, t)` over `A, B`), each known up to a global phase.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeWaveTables {
    n: usize,
    phi_a: Vec<Complex64>,
    phi_c: Vec<Complex64>,
}

impl RelativeWaveTables {
    pub fn from_states(alice: &StateVector, charlie: &StateVector) -> Result<Self> {
        let [a, b, c] = players();
        if alice.modulus() != charlie.modulus() {
            return Err(Error::ModulusMismatch { left: alice.modulus(), right: charlie.modulus() });
        }
        let phi_a = alice.permuted(&[b.clone(), c])?.normalized()?.into_amplitudes();
        let phi_c = charlie.permuted(&[a, b])?.normalized()?.into_amplitudes();
        Ok(Self { n: alice.modulus(), phi_a, phi_c })
    }

    pub fn modulus(&self) -> usize {
        self.n
    }

    pub fn phi_a(&self, u: i64, v: i64) -> Complex64 {
        self.phi_a[reduce(u, self.n) * self.n + reduce(v, self.n)]
    }

    pub fn phi_c(&self, s: i64, t: i64) -> Complex64 {
        self.phi_c[reduce(s, self.n) * self.n + reduce(t, self.n)]
    }

    /// Largest deviation from `Φ_C(s, t) = e^{iθ} ω^{Ps} Φ_A(t − s, −s)` with the
    /// best global phase `θ`.
    pub fn identity_residual(&self, sector: ChargeLabel) -> f64 {
        let n = self.n as i64;
        let p = sector.value() as i64;
        let predicted = |s: i64, t: i64| omega_pow(self.n, p * s) * self.phi_a(t - s, -s);
        let mut overlap = Complex64::new(0.0, 0.0);
        for s in 0..n {
            for t in 0..n {
                overlap += predicted(s, t).conj() * self.phi_c(s, t);
            }
        }
        let theta = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { Complex64::new(1.0, 0.0) };
        let mut worst: f64 = 0.0;
        for s in 0..n {
            for t in 0..n {
                worst = worst.max((self.phi_c(s, t) - theta * predicted(s, t)).norm());
            }
        }
        worst
    }
}

/// Ratio method: `R(s, t) = Φ_C(s, t) / Φ_A(t − s, −s)` must equal a constant
/// times `ω^{Ps}`. Returns every `P` for which `R·ω^{−Ps}` is constant over
/// the entries where both tables are nonvanishing.
pub fn level3_recover_p_ratio(tables: &RelativeWaveTables, tol: f64) -> Result<Recovery> {
    let n = tables.n as i64;
    let scale = tables.phi_a.iter().chain(&tables.phi_c).map(|z| z.norm()).fold(0.0, f64::max);
    let cutoff = 1e-6 * scale;
    let mut entries = Vec::new();
    for s in 0..n {
        for t in 0..n {
            let (c, a) = (tables.phi_c(s, t), tables.phi_a(t - s, -s));
            if c.norm() > cutoff && a.norm() > cutoff {
                let r = c / a;
                if (r.norm() - 1.0).abs() > 1e-6 {
                    return Err(Error::Contract(format!("|R({s},{t})| = {:.6}: tables do not come from one physical state", r.norm())));
                }
                entries.push((s, r));
            }
        }
    }
    let distinct: BTreeSet<i64> = entries.iter().map(|e| e.0).collect();
    if distinct.len() < 2 {
        return Err(Error::Localization("the frames are never found at two different relative positions".into()));
    }
    let labels = (0..n)
        .filter(|&p| {
            let (s0, r0) = entries[0];
            let reference = r0 * omega_pow(tables.n, -p * s0);
            entries.iter().all(|&(s, r)| (r * omega_pow(tables.n, -p * s) - reference).norm() < tol)
        })
        .map(|p| p as usize)
        .collect();
    Recovery::from_labels(labels, tables.n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessFit {
    /// Mean `|⟨out|S^P in⟩|` for every `P`.
    pub scores: Vec<f64>,
    pub best: ChargeLabel,
    pub margin: f64,
}

/// Fits the frame change `A → C` to pairs of (state relative to `A`, state
/// relative to `C`).
pub fn level3_recover_p_process(pairs: &[(StateVector, StateVector)]) -> Result<ProcessFit> {
    let first = pairs.first().ok_or_else(|| Error::Configuration("process fit needs at least one pair".into()))?;
    let n = first.0.modulus();
    let [a, b, c] = players();
    let mut scores = Vec::with_capacity(n);
    for p in ChargeLabel::all(n) {
        let fc = build_s_p(&a, &c, std::slice::from_ref(&b), p)?;
        let mut total = 0.0;
        for (input, output) in pairs {
            let moved = fc.apply(&input.clone().normalized()?)?;
            total += output.clone().normalized()?.inner(&moved)?.norm();
        }
        scores.push(total / pairs.len() as f64);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    let margin = scores[order[0]] - scores[order[1]];
    if margin < PROCESS_MARGIN {
        return Err(Error::Indeterminate(format!("best fits differ by {margin:.1e}")));
    }
    Ok(ProcessFit { best: ChargeLabel::new(order[0] as i64, n), margin, scores })
}

/// What Alice learns from the unprojected two-branch state once the sector
/// is measurable.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtraParticleReport {
    pub weights: Vec<f64>,
    /// Branch phase relative to `A` in each populated sector.
    pub branch_phases: Vec<Option<f64>>,
    /// The two sectors combined.
    pub sectors_used: Option<(ChargeLabel, ChargeLabel)>,
    /// Candidates for `x1 − x2` mod `N`.
    pub separations: Vec<usize>,
    /// Candidates for the preparation phase, one per separation.
    pub phi_candidates: Vec<f64>,
}

/// Measures the sector distribution, post-selects each populated sector,
/// extracts `Φ_P = φ + (x1 − x2)P·2π/N` relative to `A` (marker `C` at
/// `markers`), and solves two sectors for `x1 − x2` and `φ`.
pub fn extra_particle_mode(kin: &KinematicalState, markers: (usize, usize)) -> Result<ExtraParticleReport> {
    let n = kin.modulus();
    let [a, _, c] = players();
    let weights = sector_weights(kin);
    let mut branch_phases = vec![None; n];
    for p in ChargeLabel::all(n) {
        if weights[p.value()] < POPULATED {
            continue;
        }
        let (phys, _) = sector_project(kin, p)?;
        let rel = reduce_to_frame(&phys, &a, origin(n))?;
        branch_phases[p.value()] = Some(extract_branch_phase(rel.state(), &c, markers)?);
    }
    let populated: Vec<usize> = (0..n).filter(|&p| branch_phases[p].is_some()).collect();
    let pair = populated
        .iter()
        .flat_map(|&p1| populated.iter().filter(move |&&p2| p2 > p1).map(move |&p2| (p1, p2)))
        .min_by_key(|&(p1, p2)| gcd(p2 - p1, n));
    let mut report = ExtraParticleReport { weights, branch_phases, sectors_used: None, separations: Vec::new(), phi_candidates: Vec::new() };
    let Some((p1, p2)) = pair else {
        return Ok(report);
    };
    let (f1, f2) = (report.branch_phases[p1].unwrap(), report.branch_phases[p2].unwrap());
    let (steps, residual) = phase_to_steps(f2 - f1, n);
    if residual > PHASE_TOLERANCE {
        return Err(Error::Indeterminate(format!("sector phases differ by a non-multiple of 2π/N ({residual:.1e})")));
    }
    report.sectors_used = Some((ChargeLabel::new(p1 as i64, n), ChargeLabel::new(p2 as i64, n)));
    report.separations = solve_congruence((p2 - p1) as i64, steps as i64, n);
    report.phi_candidates = report
        .separations
        .iter()
        .map(|&d| wrap_phase(f1 - (d * p1) as f64 * TAU / n as f64))
        .collect();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionReport {
    /// Purity of the state of `B, C` relative to `A` after tracing out `D`.
    pub purity: f64,
    /// Fidelity of each `D`-conditioned branch with the single-sector state.
    pub branch_fidelities: [f64; 2],
    /// `|⟨ψ^{P1}|ψ^{P2}⟩|` between the single-sector relative states.
    pub branch_overlap: f64,
    pub weights: [f64; 2],
}

/// Eve entangles an extra system `D` so the three-party state sits in a
/// superposition of sectors `P1` and `P2`, then the four-party state is
/// projected onto the neutral sector and reduced to `A`.
pub fn superposition_sector_demo(kin: &KinematicalState, p1: ChargeLabel, p2: ChargeLabel) -> Result<SuperpositionReport> {
    let n = kin.modulus();
    let [a, b, c] = players();
    let d = SystemId::from("D");
    let m1 = momentum_state(&d, n, -(p1.value() as i64));
    let m2 = momentum_state(&d, n, -(p2.value() as i64));
    let d_state = if p1 == p2 {
        m1.clone()
    } else {
        let amps = m1.amplitudes().iter().zip(m2.amplitudes()).map(|(x, y)| x + y).collect();
        StateVector::new(vec![d.clone()], n, amps, m1.context().clone())?.normalized()?
    };
    let kin4 = KinematicalState::new(kin.state().tensor(&d_state)?)?;
    let (phys4, _) = sector_project(&kin4, ChargeLabel::new(0, n))?;
    let rel4 = reduce_to_frame(&phys4, &a, origin(n))?;
    let bc = [b, c];
    let purity = partial_trace(&rel4.state().density(), &bc)?.purity();

    let psi = rel4.state().permuted(&[bc[0].clone(), bc[1].clone(), d.clone()])?;
    let branch = |m: &StateVector| -> Result<StateVector> {
        let amps = psi
            .amplitudes()
            .chunks(n)
            .map(|row| row.iter().zip(m.amplitudes()).map(|(x, y)| y.conj() * x).sum())
            .collect();
        StateVector::new(bc.to_vec(), n, amps, psi.context().clone())
    };
    let single = |p: ChargeLabel| -> Result<StateVector> {
        let (phys, _) = sector_project(kin, p)?;
        Ok(reduce_to_frame(&phys, &a, origin(n))?.state().clone())
    };
    let (s1, s2) = (single(p1)?, single(p2)?);
    let (b1, b2) = (branch(&m1)?, branch(&m2)?);
    let (w1, w2) = (b1.norm().powi(2), b2.norm().powi(2));
    let fid = |b: StateVector, s: &StateVector| -> Result<f64> { Ok(b.normalized()?.inner(s)?.norm()) };
    Ok(SuperpositionReport {
        purity,
        branch_fidelities: [fid(b1, &s1)?, fid(b2, &s2)?],
        branch_overlap: s1.inner(&s2)?.norm(),
        weights: if p1 == p2 { [w1, w1] } else { [w1, w2] },
    })
}

/// No Eve: Alice holds perspectival states and Charlie's follow from the
/// frame change `A → C`. `markers` gives `C`'s position relative to `A` in
/// the two branches, as needed by the phase-difference method.
pub fn perspectival_variant_round(alice: &[RelativeState], method: Method, markers: Option<(usize, usize)>) -> Result<Recovery> {
    let first = alice.first().ok_or_else(|| Error::Configuration("no perspectival state supplied".into()))?;
    let n = first.modulus();
    let [a, _, c] = players();
    if alice.iter().any(|r| r.frame() != &a) {
        return Err(Error::Configuration("perspectival states must be relative to A".into()));
    }
    let charlie: Vec<RelativeState> = alice.iter().map(|r| frame_jump(r, &c, origin(n))).collect::<Result<_>>()?;
    match method {
        Method::PhaseDifference => {
            let (m1, m2) = markers.ok_or_else(|| Error::Configuration("phase difference needs branch markers".into()))?;
            let phi_a = extract_branch_phase(first.state(), &c, (m1, m2))?;
            let back = (reduce(-(m1 as i64), n), reduce(-(m2 as i64), n));
            let phi_c = extract_branch_phase(charlie[0].state(), &a, back)?;
            recover_from_phase_difference(phi_a, phi_c, m2 as i64 - m1 as i64, n)
        }
        Method::Ratio => level3_recover_p_ratio(&RelativeWaveTables::from_states(first.state(), charlie[0].state())?, PHASE_TOLERANCE),
        Method::Process => {
            let pairs: Vec<(StateVector, StateVector)> =
                alice.iter().zip(&charlie).map(|(x, y)| (x.state().clone(), y.state().clone())).collect();
            Ok(Recovery::Unique(level3_recover_p_process(&pairs)?.best))
        }
    }
}
