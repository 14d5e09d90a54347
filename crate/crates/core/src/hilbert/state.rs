use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    dimension, ensure_disjoint, ensure_distinct, join, permutation_map, position_of, same_set, to_digits, to_index,
    DensityMatrix, SystemId, CANONICAL_PHASE_CUTOFF,
};
use crate::error::{Error, Result};
use crate::group::{ChargeLabel, GroupElement};

/// Whose description a state vector is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Context {
    /// Relative to the external referee (kinematical description).
    External,
    /// Projected onto a single charge sector.
    Physical { sector: ChargeLabel },
    /// Relative to an internal frame placed at `origin`.
    Relative { frame: SystemId, origin: GroupElement, sector: ChargeLabel },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    systems: Vec<SystemId>,
    n: usize,
    amplitudes: Vec<Complex64>,
    context: Context,
}

impl StateVector {
    pub fn new(systems: Vec<SystemId>, n: usize, amplitudes: Vec<Complex64>, context: Context) -> Result<Self> {
        ensure_distinct(&systems)?;
        let dim = dimension(n, systems.len());
        if amplitudes.len() != dim {
            return Err(Error::Composition(format!(
                "{} amplitudes supplied for registry {} of dimension {dim}",
                amplitudes.len(),
                join(&systems)
            )));
        }
        Ok(Self { systems, n, amplitudes, context })
    }

    /// Product basis state with the given digit per system.
    pub fn basis(systems: Vec<SystemId>, n: usize, digits: &[usize]) -> Result<Self> {
        if digits.len() != systems.len() || digits.iter().any(|&d| d >= n) {
            return Err(Error::Composition(format!("invalid basis digits {digits:?} for N={n}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dimension(n, systems.len())];
        amps[to_index(digits, n)] = Complex64::new(1.0, 0.0);
        Self::new(systems, n, amps, Context::External)
    }

    /// Builds amplitudes from a function of the digit tuple.
    pub fn from_fn(systems: Vec<SystemId>, n: usize, mut f: impl FnMut(&[usize]) -> Complex64) -> Result<Self> {
        let k = systems.len();
        let amps = (0..dimension(n, k)).map(|i| f(&to_digits(i, n, k))).collect();
        Self::new(systems, n, amps, Context::External)
    }

    /// Single-system momentum eigenstate `N^{-1/2} Σ_y ω^{ky} |y⟩`.
    pub fn momentum(system: SystemId, n: usize, label: i64) -> Self {
        Self::from_fn(vec![system], n, |d| {
            crate::group::omega_pow(n, label * d[0] as i64) / (n as f64).sqrt()
        })
        .expect("single-system registry")
    }

    /// Haar-random pure state (normalized complex Gaussian amplitudes).
    pub fn random(systems: Vec<SystemId>, n: usize, rng: &mut impl Rng) -> Result<Self> {
        let dim = dimension(n, systems.len());
        let amps = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::new(systems, n, amps, Context::External)?.normalized()
    }

    pub fn systems(&self) -> &[SystemId] {
        &self.systems
    }

    pub fn modulus(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn amplitude(&self, digits: &[usize]) -> Complex64 {
        self.amplitudes[to_index(digits, self.n)]
    }

    pub fn context(&self) -> &Context {
        &self.context
    }

    pub fn with_context(mut self, context: Context) -> Self {
        self.context = context;
        self
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm();
        if norm < 1e-300 {
            return Err(Error::Contract("cannot normalize the zero vector".into()));
        }
        self.amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(self)
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        self.amplitudes.iter_mut().for_each(|a| *a *= factor);
        self
    }

    /// Same state with the tensor factors listed in `order`.
    pub fn permuted(&self, order: &[SystemId]) -> Result<Self> {
        if order == self.systems.as_slice() {
            return Ok(self.clone());
        }
        let map = permutation_map(&self.systems, order, self.n)?;
        let amplitudes = map.iter().map(|&i| self.amplitudes[i]).collect();
        Ok(Self { systems: order.to_vec(), n: self.n, amplitudes, context: self.context.clone() })
    }

    pub fn tensor(&self, other: &StateVector) -> Result<Self> {
        tensor_states(self, other)
    }

    /// `⟨self|other⟩`, after bringing `other` into this registry order.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n != other.n || !same_set(&self.systems, &other.systems) {
            return Err(Error::Composition(format!(
                "cannot compare {} (N={}) with {} (N={})",
                join(&self.systems),
                self.n,
                join(&other.systems),
                other.n
            )));
        }
        let other = other.permuted(&self.systems)?;
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// Largest entrywise deviation from `other`, aligned by system label.
    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        if self.n != other.n || !same_set(&self.systems, &other.systems) {
            return Err(Error::Composition("registries differ".into()));
        }
        let other = other.permuted(&self.systems)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Global phase fixed so the first amplitude above the cutoff (in index
    /// order) is real and positive.
    pub fn canonicalized(&self) -> Self {
        let mut out = self.clone();
        if let Some(lead) = self.amplitudes.iter().find(|a| a.norm() > CANONICAL_PHASE_CUTOFF) {
            let phase = lead.conj() / lead.norm();
            out.amplitudes.iter_mut().for_each(|a| *a *= phase);
        }
        out
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_state(self)
    }

    /// Unnormalized conditional vector `(⟨value|_system ⊗ 1)|ψ⟩` on the
    /// remaining systems.
    pub fn condition_on(&self, system: &SystemId, value: usize) -> Result<StateVector> {
        let slot = position_of(&self.systems, system)?;
        let k = self.systems.len();
        let rest: Vec<SystemId> = self.systems.iter().filter(|s| *s != system).cloned().collect();
        let dim = dimension(self.n, k - 1);
        let mut amps = Vec::with_capacity(dim);
        let mut full = vec![0; k];
        for idx in 0..dim {
            let digits = to_digits(idx, self.n, k - 1);
            let mut j = 0;
            for (i, d) in full.iter_mut().enumerate() {
                if i == slot {
                    *d = value;
                } else {
                    *d = digits[j];
                    j += 1;
                }
            }
            amps.push(self.amplitudes[to_index(&full, self.n)]);
        }
        Ok(StateVector { systems: rest, n: self.n, amplitudes: amps, context: self.context.clone() })
    }

    /// Translates the listed systems by `shift` (each `|x⟩ ↦ |x+shift⟩`).
    pub fn translated(&self, which: &[SystemId], shift: i64) -> Result<Self> {
        let slots: Vec<usize> = which.iter().map(|s| position_of(&self.systems, s)).collect::<Result<_>>()?;
        let k = self.systems.len();
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            let mut digits = to_digits(idx, self.n, k);
            for &s in &slots {
                digits[s] = crate::group::reduce(digits[s] as i64 + shift, self.n);
            }
            out[to_index(&digits, self.n)] = *a;
        }
        Ok(Self { systems: self.systems.clone(), n: self.n, amplitudes: out, context: self.context.clone() })
    }

    /// Amplitudes as `[re, im]` pairs.
    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.amplitudes.iter().map(|a| [a.re, a.im]).collect()
    }
}

/// Kronecker product respecting the declared system order (`a` first).
pub fn tensor_states(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    ensure_disjoint(&a.systems, &b.systems)?;
    if a.n != b.n {
        return Err(Error::ModulusMismatch { left: a.n, right: b.n });
    }
    let mut systems = a.systems.clone();
    systems.extend(b.systems.iter().cloned());
    let amplitudes = a.amplitudes.iter().flat_map(|x| b.amplitudes.iter().map(move |y| x * y)).collect();
    StateVector::new(systems, a.n, amplitudes, a.context.clone())
}

/// `|⟨a|b⟩|` for states on the same systems.
pub fn fidelity_up_to_global_phase(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm())
}
