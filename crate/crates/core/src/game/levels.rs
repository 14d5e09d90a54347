use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution as _};

use crate::error::{Error, Result};
use crate::group::{wrap_phase, GroupElement};
use crate::hilbert::{hermitian_basis, hermitian_eigen, Context, DenseOperator, DensityMatrix, StateVector, SystemId};
use crate::neutral::RelativeState;

/// Values closer than this count as the same measurement outcome.
const OUTCOME_MERGE: f64 = 1e-9;

/// Purity below `1 − MIXED_THRESHOLD` flags a reconstruction as mixed.
pub const MIXED_THRESHOLD: f64 = 1e-6;

/// Outcome statistics of one observable, sorted by value.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub values: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl Distribution {
    fn from_pairs(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::new();
        let mut probabilities: Vec<f64> = Vec::new();
        for (v, p) in pairs {
            match values.last() {
                Some(&last) if (v - last).abs() < OUTCOME_MERGE => *probabilities.last_mut().unwrap() += p,
                _ => {
                    values.push(v);
                    probabilities.push(p);
                }
            }
        }
        Self { values, probabilities }
    }

    /// Half the L1 distance, matching outcomes by value.
    pub fn total_variation(&self, other: &Distribution) -> f64 {
        let mut pairs: Vec<(f64, f64)> = self.values.iter().copied().zip(self.probabilities.iter().copied()).collect();
        pairs.extend(other.values.iter().copied().zip(other.probabilities.iter().map(|p| -p)));
        let merged = Distribution::from_pairs(pairs);
        0.5 * merged.probabilities.iter().map(|p| p.abs()).sum::<f64>()
    }

    /// Empirical frequencies from `shots` draws.
    pub fn sample(&self, shots: u64, rng: &mut impl Rng) -> Distribution {
        let mut remaining = shots;
        let mut mass = 1.0;
        let mut freq = Vec::with_capacity(self.probabilities.len());
        for (i, &p) in self.probabilities.iter().enumerate() {
            let count = if i + 1 == self.probabilities.len() || mass <= 0.0 {
                remaining
            } else {
                let q = (p.max(0.0) / mass).clamp(0.0, 1.0);
                Binomial::new(remaining, q).map(|b| b.sample(rng)).unwrap_or(0)
            };
            remaining -= count;
            mass -= p.max(0.0);
            freq.push(count as f64 / shots as f64);
        }
        Distribution { values: self.values.clone(), probabilities: freq }
    }
}

/// Statistics of the framed observable `O_B ⊗ |y⟩⟨y|` on a pure relative state.
pub fn level1_statistics(rel: &RelativeState, o_b: &DenseOperator, y: usize) -> Result<Distribution> {
    level1_statistics_density(&rel.state().density(), o_b, y)
}

/// Same as [`level1_statistics`] for a relative density matrix on two systems.
pub fn level1_statistics_density(rho: &DensityMatrix, o_b: &DenseOperator, y: usize) -> Result<Distribution> {
    let n = rho.modulus();
    let (b, partner) = framed_pair(rho, o_b)?;
    if y >= n {
        return Err(Error::Configuration(format!("position {y} outside Z_{n}")));
    }
    let block = conditional_block(&rho.permuted(&[b, partner])?, y);
    let (values, vectors) = hermitian_eigen(o_b.matrix());
    let mut pairs = Vec::with_capacity(n + 1);
    let mut kept = 0.0;
    for (k, &lambda) in values.iter().enumerate() {
        let v = vectors.column(k);
        let p = (v.adjoint() * &block * v)[(0, 0)].re;
        kept += p;
        pairs.push((lambda, p));
    }
    pairs.push((0.0, 1.0 - kept));
    Ok(Distribution::from_pairs(pairs))
}

fn framed_pair(rho: &DensityMatrix, o_b: &DenseOperator) -> Result<(SystemId, SystemId)> {
    if rho.systems().len() != 2 || o_b.in_systems().len() != 1 || !o_b.is_square_registry() {
        return Err(Error::Composition("framed statistics need a two-system state and a one-system observable".into()));
    }
    if !o_b.is_hermitian(1e-10) {
        return Err(Error::Contract("framed observable must be Hermitian".into()));
    }
    let b = o_b.in_systems()[0].clone();
    let partner = rho
        .systems()
        .iter()
        .find(|s| **s != b)
        .cloned()
        .ok_or_else(|| Error::Composition(format!("{b} is not part of the state")))?;
    if !rho.systems().contains(&b) {
        return Err(Error::Composition(format!("{b} is not part of the state")));
    }
    Ok((b, partner))
}

/// `⟨y|_2 ρ |y⟩_2` for a density matrix on `[first, second]`.
fn conditional_block(rho: &DensityMatrix, y: usize) -> DMatrix<Complex64> {
    let n = rho.modulus();
    DMatrix::from_fn(n, n, |i, j| rho.matrix()[(i * n + y, j * n + y)])
}

/// The Hermitian operator basis on one system: its expectations fix every
/// framed statistic.
pub fn framed_family(system: &SystemId, n: usize) -> Vec<DenseOperator> {
    let w = hermitian_basis(n);
    (0..n * n)
        .map(|m| {
            let mat = DMatrix::from_fn(n, n, |i, j| w[(i * n + j, m)]);
            DenseOperator::square(vec![system.clone()], n, mat).expect("one system")
        })
        .collect()
}

/// Largest total-variation distance between the framed statistics of two
/// relative density matrices, over the framed family on `target` and every
/// partner position. With `shots`, both sides are sampled first.
pub fn level1_max_deviation(
    a: &DensityMatrix,
    b: &DensityMatrix,
    target: &SystemId,
    shots: Option<(u64, &mut dyn rand::RngCore)>,
) -> Result<f64> {
    let n = a.modulus();
    let mut worst: f64 = 0.0;
    let mut shots = shots;
    for op in framed_family(target, n) {
        for y in 0..n {
            let mut da = level1_statistics_density(a, &op, y)?;
            let mut db = level1_statistics_density(b, &op, y)?;
            if let Some((s, rng)) = shots.as_mut() {
                da = da.sample(*s, rng);
                db = db.sample(*s, rng);
            }
            worst = worst.max(da.total_variation(&db));
        }
    }
    Ok(worst)
}

/// Output of relational tomography.
#[derive(Debug, Clone, PartialEq)]
pub struct Tomography {
    /// Dominant eigenvector, phase-canonicalized.
    pub state: StateVector,
    pub density: DensityMatrix,
    pub purity: f64,
    /// Set when the reconstruction is not pure.
    pub mixed: bool,
    pub measurements: usize,
}

/// Reconstructs a relative state from the expectations of the relational
/// observables built on a Hermitian operator basis, measured on the global
/// state the relative state belongs to.
pub fn level2_tomography(rel: &RelativeState) -> Result<Tomography> {
    let phys = rel.lift()?;
    let n = rel.modulus();
    let rest = rel.state().systems().to_vec();
    // ⟨b_x| V_s O V_s† |b_x⟩ = ⟨V_s† b_x| O |V_s† b_x⟩ with s = x − X
    let branches: Vec<StateVector> = (0..n)
        .map(|x| {
            let b = phys.state().condition_on(rel.frame(), x)?;
            b.translated(&rest, -(x as i64 - rel.origin().value() as i64))
        })
        .collect::<Result<_>>()?;
    reconstruct(rest, n, |entries| {
        branches
            .iter()
            .map(|w| {
                let a = w.amplitudes();
                entries.iter().map(|&(i, j, h)| a[i].conj() * h * a[j]).sum::<Complex64>().re
            })
            .sum()
    })
}

/// Tomography of a (possibly mixed) relative density matrix.
pub fn level2_tomography_density(rho: &DensityMatrix) -> Result<Tomography> {
    let m = rho.matrix();
    reconstruct(rho.systems().to_vec(), rho.modulus(), |entries| {
        entries.iter().map(|&(i, j, h)| (h * m[(j, i)]).re).sum()
    })
}

/// `ρ = Σ_m ⟨H_m⟩ H_m`; `expect` receives the nonzero entries `(i, j, H_ij)`.
fn reconstruct(
    systems: Vec<SystemId>,
    n: usize,
    expect: impl Fn(&[(usize, usize, Complex64)]) -> f64,
) -> Result<Tomography> {
    let d = n.pow(systems.len() as u32);
    let w = hermitian_basis(d);
    let mut rho = DMatrix::<Complex64>::zeros(d, d);
    for m in 0..d * d {
        let entries: Vec<(usize, usize, Complex64)> = w
            .column(m)
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(idx, &z)| (idx / d, idx % d, z))
            .collect();
        let e = expect(&entries);
        for &(i, j, h) in &entries {
            rho[(i, j)] += h * e;
        }
    }
    let density = DensityMatrix::new(systems, n, rho)?;
    let purity = density.purity();
    let (_, state) = density.dominant_eigenvector();
    Ok(Tomography { state: state.with_context(Context::External), density, purity, mixed: purity < 1.0 - MIXED_THRESHOLD, measurements: d * d })
}

/// Relative phase of the branch where `marker` sits at `positions.1` with
/// respect to the branch where it sits at `positions.0`.
///
/// The two conditional states of the remaining systems are aligned by the
/// joint translation that maximizes their overlap; the phase of that overlap
/// is returned in `(−π, π]`.
pub fn extract_branch_phase(state: &StateVector, marker: &SystemId, positions: (usize, usize)) -> Result<f64> {
    let n = state.modulus();
    let (m1, m2) = positions;
    if m1 == m2 {
        return Err(Error::Extraction(format!("both branches place {marker} at {m1}")));
    }
    if m1 >= n || m2 >= n {
        return Err(Error::Extraction("marker position outside the group".into()));
    }
    let b1 = state.condition_on(marker, m1)?;
    let b2 = state.condition_on(marker, m2)?;
    let (n1, n2) = (b1.norm(), b2.norm());
    if n1 < 1e-8 || n2 < 1e-8 {
        return Err(Error::Extraction(format!("no weight with {marker} at {}", if n1 < 1e-8 { m1 } else { m2 })));
    }
    let others = b1.systems().to_vec();
    let overlaps: Vec<Complex64> = (0..n as i64)
        .map(|s| b1.translated(&others, s)?.inner(&b2).map(|z| z / (n1 * n2)))
        .collect::<Result<_>>()?;
    let best = overlaps.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).expect("N ≥ 2");
    if best.norm() < 1.0 - 1e-6 {
        return Err(Error::Extraction(format!("branches are not translates of each other (overlap {:.3e})", best.norm())));
    }
    let phase = best.arg();
    if overlaps
        .iter()
        .any(|z| z.norm() > best.norm() - 1e-9 && wrap_phase(z.arg() - phase).abs() > 1e-6)
    {
        return Err(Error::Extraction("several alignments with different phases".into()));
    }
    Ok(wrap_phase(phase))
}

/// [`extract_branch_phase`] on a relative state.
pub fn branch_phase(rel: &RelativeState, marker: &SystemId, positions: (usize, usize)) -> Result<f64> {
    extract_branch_phase(rel.state(), marker, positions)
}

/// Origin `0` in `Z_N`.
pub(crate) fn origin(n: usize) -> GroupElement {
    GroupElement::zero(n)
}
