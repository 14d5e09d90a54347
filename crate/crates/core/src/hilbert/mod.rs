//! Tensor-product states and operators over labelled `N`-level subsystems.
//!
//! Amplitudes are stored row-major over the declared system order: the first
//! system is the most significant digit. Nothing is ever reordered
//! implicitly; every registry change goes through an explicit permutation.

mod density;
mod operator;
mod schmidt;
mod state;

pub use density::{hermitian_eigen, partial_trace, DensityMatrix};
pub use operator::DenseOperator;
pub use schmidt::{operator_schmidt_decompose, schmidt_recompose, SchmidtTerm, SCHMIDT_CUTOFF};
pub(crate) use schmidt::hermitian_basis;
pub use state::{fidelity_up_to_global_phase, tensor_states, Context, StateVector};

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitudes smaller than this are ignored when fixing a global phase.
pub const CANONICAL_PHASE_CUTOFF: f64 = 1e-8;

/// Label of a subsystem (`A`, `B`, `C`, `D`, ...).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SystemId(String);

impl SystemId {
    pub fn new(label: impl Into<String>) -> Self {
        Self(label.into())
    }

    pub fn label(&self) -> &str {
        &self.0
    }
}

impl From<&str> for SystemId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Shorthand for a list of system labels.
pub fn systems(labels: &[&str]) -> Vec<SystemId> {
    labels.iter().map(|l| SystemId::new(*l)).collect()
}

pub fn ensure_distinct(systems: &[SystemId]) -> Result<()> {
    let mut seen = HashSet::new();
    for s in systems {
        if !seen.insert(s) {
            return Err(Error::Composition(format!("system {s} appears twice in registry")));
        }
    }
    Ok(())
}

pub(crate) fn ensure_disjoint(a: &[SystemId], b: &[SystemId]) -> Result<()> {
    if let Some(s) = a.iter().find(|s| b.contains(s)) {
        return Err(Error::Composition(format!("system {s} present on both sides of a tensor product")));
    }
    Ok(())
}

pub(crate) fn position_of(systems: &[SystemId], s: &SystemId) -> Result<usize> {
    systems
        .iter()
        .position(|x| x == s)
        .ok_or_else(|| Error::Composition(format!("unknown system {s}")))
}

/// Whether two registries hold the same systems, in any order.
pub fn same_registry(a: &[SystemId], b: &[SystemId]) -> bool {
    same_set(a, b)
}

pub(crate) fn same_set(a: &[SystemId], b: &[SystemId]) -> bool {
    a.len() == b.len() && a.iter().all(|s| b.contains(s))
}

pub(crate) fn dimension(n: usize, k: usize) -> usize {
    n.pow(k as u32)
}

pub(crate) fn to_digits(mut index: usize, n: usize, k: usize) -> Vec<usize> {
    let mut digits = vec![0; k];
    for d in digits.iter_mut().rev() {
        *d = index % n;
        index /= n;
    }
    digits
}

pub(crate) fn to_index(digits: &[usize], n: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * n + d)
}

/// For every index in the `to` ordering, the index of the same basis state
/// in the `from` ordering.
pub(crate) fn permutation_map(from: &[SystemId], to: &[SystemId], n: usize) -> Result<Vec<usize>> {
    if !same_set(from, to) {
        return Err(Error::Composition(format!(
            "registries {} and {} are not permutations of each other",
            join(from),
            join(to)
        )));
    }
    let k = to.len();
    let slots: Vec<usize> = to.iter().map(|s| position_of(from, s)).collect::<Result<_>>()?;
    let dim = dimension(n, k);
    let mut map = Vec::with_capacity(dim);
    let mut from_digits = vec![0; k];
    for idx in 0..dim {
        let digits = to_digits(idx, n, k);
        for (j, &slot) in slots.iter().enumerate() {
            from_digits[slot] = digits[j];
        }
        map.push(to_index(&from_digits, n));
    }
    Ok(map)
}

pub(crate) fn join(systems: &[SystemId]) -> String {
    let labels: Vec<&str> = systems.iter().map(|s| s.label()).collect();
    format!("[{}]", labels.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digits_round_trip() {
        for idx in 0..27 {
            assert_eq!(to_index(&to_digits(idx, 3, 3), 3), idx);
        }
        assert_eq!(to_digits(5, 2, 3), vec![1, 0, 1]);
    }

    #[test]
    fn permutation_of_two_systems() {
        let ab = systems(&["A", "B"]);
        let ba = systems(&["B", "A"]);
        let map = permutation_map(&ab, &ba, 3).unwrap();
        // |b=1,a=2> in BA order is index 5; in AB order it is 2*3+1 = 7
        assert_eq!(map[5], 7);
        assert!(permutation_map(&ab, &systems(&["A", "C"]), 3).is_err());
    }
}
