use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{
    dimension, ensure_disjoint, ensure_distinct, join, permutation_map, position_of, same_set, to_digits, to_index,
    StateVector, SystemId,
};
use crate::error::{Error, Result};

const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Complex matrix from the `in_systems` registry to the `out_systems`
/// registry. Rows follow the output order, columns the input order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    in_systems: Vec<SystemId>,
    out_systems: Vec<SystemId>,
    n: usize,
    matrix: DMatrix<Complex64>,
    hermitian: bool,
}

impl DenseOperator {
    pub fn new(
        in_systems: Vec<SystemId>,
        out_systems: Vec<SystemId>,
        n: usize,
        matrix: DMatrix<Complex64>,
    ) -> Result<Self> {
        ensure_distinct(&in_systems)?;
        ensure_distinct(&out_systems)?;
        let (rows, cols) = (dimension(n, out_systems.len()), dimension(n, in_systems.len()));
        if matrix.shape() != (rows, cols) {
            return Err(Error::Composition(format!(
                "matrix of shape {:?} does not map {} to {} at N={n}",
                matrix.shape(),
                join(&in_systems),
                join(&out_systems)
            )));
        }
        Ok(Self { in_systems, out_systems, n, matrix, hermitian: false })
    }

    /// Operator whose input and output registries coincide.
    pub fn square(systems: Vec<SystemId>, n: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        Self::new(systems.clone(), systems, n, matrix)
    }

    pub fn identity(systems: Vec<SystemId>, n: usize) -> Self {
        let d = dimension(n, systems.len());
        Self::square(systems, n, DMatrix::identity(d, d)).expect("identity has matching shape").marked_hermitian()
    }

    /// Diagonal operator with entry `f(digits)` on each basis state.
    pub fn diagonal(systems: Vec<SystemId>, n: usize, f: impl Fn(&[usize]) -> Complex64) -> Result<Self> {
        let k = systems.len();
        let d = dimension(n, k);
        let diag = (0..d).map(|i| f(&to_digits(i, n, k)));
        Self::square(systems, n, DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, diag)))
    }

    /// Generalized permutation matrix: input basis state `digits` goes to
    /// `f(digits).0` (output digits) with amplitude `f(digits).1`.
    pub fn from_monomial(
        in_systems: Vec<SystemId>,
        out_systems: Vec<SystemId>,
        n: usize,
        f: impl Fn(&[usize]) -> (Vec<usize>, Complex64),
    ) -> Result<Self> {
        let k_in = in_systems.len();
        let rows = dimension(n, out_systems.len());
        let cols = dimension(n, k_in);
        let mut m = DMatrix::zeros(rows, cols);
        for col in 0..cols {
            let (out, amp) = f(&to_digits(col, n, k_in));
            if out.len() != out_systems.len() || out.iter().any(|&d| d >= n) {
                return Err(Error::Composition(format!("monomial produced invalid digits {out:?}")));
            }
            m[(to_index(&out, n), col)] += amp;
        }
        Self::new(in_systems, out_systems, n, m)
    }

    /// Operator on a single system.
    pub fn local(system: SystemId, n: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        Self::square(vec![system], n, matrix)
    }

    pub fn in_systems(&self) -> &[SystemId] {
        &self.in_systems
    }

    pub fn out_systems(&self) -> &[SystemId] {
        &self.out_systems
    }

    pub fn modulus(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn is_square_registry(&self) -> bool {
        self.in_systems == self.out_systems
    }

    /// Whether the Hermitian flag was set through [`Self::with_hermitian_flag`].
    pub fn hermitian_flag(&self) -> bool {
        self.hermitian
    }

    /// Sets the Hermitian flag after verifying `‖M − M†‖_max < 1e-10`.
    pub fn with_hermitian_flag(mut self) -> Result<Self> {
        if !self.is_hermitian(HERMITIAN_TOLERANCE) {
            return Err(Error::Contract(format!(
                "operator on {} is not Hermitian (deviation {:.3e})",
                join(&self.in_systems),
                self.hermiticity_defect()
            )));
        }
        self.hermitian = true;
        Ok(self)
    }

    fn marked_hermitian(mut self) -> Self {
        self.hermitian = true;
        self
    }

    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square_registry() {
            return f64::INFINITY;
        }
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() < tol
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.matrix.ncols();
        if self.matrix.nrows() != d {
            return f64::INFINITY;
        }
        max_abs(&(self.matrix.adjoint() * &self.matrix - DMatrix::identity(d, d)))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() < tol
    }

    pub fn adjoint(&self) -> Self {
        Self {
            in_systems: self.out_systems.clone(),
            out_systems: self.in_systems.clone(),
            n: self.n,
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
        }
    }

    /// Same operator expressed in different registry orders.
    pub fn reordered(&self, in_order: &[SystemId], out_order: &[SystemId]) -> Result<Self> {
        if in_order == self.in_systems.as_slice() && out_order == self.out_systems.as_slice() {
            return Ok(self.clone());
        }
        let map_in = permutation_map(&self.in_systems, in_order, self.n)?;
        let map_out = permutation_map(&self.out_systems, out_order, self.n)?;
        let m = DMatrix::from_fn(map_out.len(), map_in.len(), |i, j| self.matrix[(map_out[i], map_in[j])]);
        Ok(Self { in_systems: in_order.to_vec(), out_systems: out_order.to_vec(), n: self.n, matrix: m, hermitian: self.hermitian })
    }

    /// Square operator expressed in the given order on both sides.
    pub fn reordered_square(&self, order: &[SystemId]) -> Result<Self> {
        self.reordered(order, order)
    }

    /// Renames a system label on both registries (e.g. after a frame swap).
    pub fn relabeled(&self, from: &SystemId, to: &SystemId) -> Result<Self> {
        let rename = |list: &[SystemId]| -> Vec<SystemId> {
            list.iter().map(|s| if s == from { to.clone() } else { s.clone() }).collect()
        };
        let (ins, outs) = (rename(&self.in_systems), rename(&self.out_systems));
        ensure_distinct(&ins)?;
        ensure_distinct(&outs)?;
        Ok(Self { in_systems: ins, out_systems: outs, ..self.clone() })
    }

    pub fn tensor(&self, other: &DenseOperator) -> Result<Self> {
        ensure_disjoint(&self.in_systems, &other.in_systems)?;
        ensure_disjoint(&self.out_systems, &other.out_systems)?;
        if self.n != other.n {
            return Err(Error::ModulusMismatch { left: self.n, right: other.n });
        }
        let mut ins = self.in_systems.clone();
        ins.extend(other.in_systems.iter().cloned());
        let mut outs = self.out_systems.clone();
        outs.extend(other.out_systems.iter().cloned());
        let mut op = Self::new(ins, outs, self.n, self.matrix.kronecker(&other.matrix))?;
        op.hermitian = self.hermitian && other.hermitian;
        Ok(op)
    }

    /// Extends a square operator by the identity to the full registry
    /// `systems`, in that order.
    pub fn embed(&self, systems: &[SystemId]) -> Result<Self> {
        if !self.is_square_registry() {
            return Err(Error::Composition("only square-registry operators can be embedded".into()));
        }
        for s in &self.in_systems {
            position_of(systems, s)?;
        }
        let rest: Vec<SystemId> = systems.iter().filter(|s| !self.in_systems.contains(s)).cloned().collect();
        if rest.is_empty() {
            return self.reordered_square(systems);
        }
        self.tensor(&Self::identity(rest, self.n))?.reordered_square(systems)
    }

    /// `self ∘ other`; `other`'s output registry must be a permutation of
    /// this operator's input registry.
    pub fn compose(&self, other: &DenseOperator) -> Result<Self> {
        self.check_modulus(other.n)?;
        if !same_set(&self.in_systems, &other.out_systems) {
            return Err(Error::Composition(format!(
                "cannot compose: output {} does not match input {}",
                join(&other.out_systems),
                join(&self.in_systems)
            )));
        }
        let other = other.reordered(&other.in_systems, &self.in_systems)?;
        Self::new(other.in_systems.clone(), self.out_systems.clone(), self.n, mul_skipping_zeros(&self.matrix, &other.matrix))
    }

    /// `U O U†` for a square-registry `self = O` on `U`'s input registry.
    pub fn conjugated_by(&self, u: &DenseOperator) -> Result<Self> {
        let mut out = u.compose(self)?.compose(&u.adjoint())?;
        out.hermitian = self.hermitian;
        Ok(out)
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        self.check_modulus(state.modulus())?;
        if !same_set(&self.in_systems, state.systems()) {
            return Err(Error::Composition(format!(
                "operator on {} applied to state on {}",
                join(&self.in_systems),
                join(state.systems())
            )));
        }
        let aligned = state.permuted(&self.in_systems)?;
        let v = nalgebra::DVector::from_column_slice(aligned.amplitudes());
        let w = &self.matrix * v;
        StateVector::new(self.out_systems.clone(), self.n, w.as_slice().to_vec(), state.context().clone())
    }

    /// `⟨ψ|O|ψ⟩` for a square-registry operator.
    pub fn expectation(&self, state: &StateVector) -> Result<Complex64> {
        state.inner(&self.apply(state)?)
    }

    /// Entrywise combination `a·self + b·other`, aligned by system labels.
    pub fn linear_combination(&self, a: Complex64, other: &DenseOperator, b: Complex64) -> Result<Self> {
        self.check_modulus(other.n)?;
        let other = other.reordered(&self.in_systems, &self.out_systems)?;
        Self::new(
            self.in_systems.clone(),
            self.out_systems.clone(),
            self.n,
            self.matrix.map(|x| x * a) + other.matrix.map(|x| x * b),
        )
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self { matrix: self.matrix.map(|x| x * factor), hermitian: self.hermitian && factor.im == 0.0, ..self.clone() }
    }

    /// Largest entrywise deviation from `other` after aligning registries.
    pub fn max_abs_diff(&self, other: &DenseOperator) -> Result<f64> {
        self.check_modulus(other.n)?;
        let other = other.reordered(&self.in_systems, &self.out_systems)?;
        Ok(max_abs(&(&self.matrix - &other.matrix)))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Hilbert–Schmidt inner product `tr(self† other)`.
    pub fn hs_inner(&self, other: &DenseOperator) -> Result<Complex64> {
        let other = other.reordered(&self.in_systems, &self.out_systems)?;
        Ok(self.matrix.iter().zip(other.matrix.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn hs_norm(&self) -> f64 {
        self.matrix.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_modulus(&self, other: usize) -> Result<()> {
        if self.n == other {
            Ok(())
        } else {
            Err(Error::ModulusMismatch { left: self.n, right: other })
        }
    }
}

/// `a · b`, skipping structurally zero entries of `b`. Frame changes are
/// generalized permutations, so this keeps most compositions quadratic.
pub(crate) fn mul_skipping_zeros(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for j in 0..b.ncols() {
        for k in 0..b.nrows() {
            let bkj = b[(k, j)];
            if bkj.re == 0.0 && bkj.im == 0.0 {
                continue;
            }
            let mut col = out.column_mut(j);
            col.axpy(bkj, &a.column(k), Complex64::new(1.0, 0.0));
        }
    }
    out
}

pub(crate) fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::systems;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_tensor_identity() {
        let i = DenseOperator::identity(systems(&["A"]), 3).tensor(&DenseOperator::identity(systems(&["B"]), 3)).unwrap();
        assert_eq!(i.matrix(), &DMatrix::identity(9, 9));
        assert!(i.hermitian_flag());
    }

    #[test]
    fn overlapping_tensor_rejected() {
        let i = DenseOperator::identity(systems(&["A"]), 2);
        assert!(matches!(i.tensor(&i), Err(Error::Composition(_))));
    }

    #[test]
    fn embed_respects_order() {
        let x = DenseOperator::from_monomial(systems(&["B"]), systems(&["B"]), 2, |d| (vec![1 - d[0]], c(1.0))).unwrap();
        let full = x.embed(&systems(&["A", "B"])).unwrap();
        let s = StateVector::basis(systems(&["A", "B"]), 2, &[1, 0]).unwrap();
        let out = full.apply(&s).unwrap();
        assert_eq!(out.amplitude(&[1, 1]), c(1.0));
    }

    #[test]
    fn compose_aligns_registries() {
        let swap = DenseOperator::from_monomial(systems(&["A", "B"]), systems(&["B", "A"]), 3, |d| (vec![d[1], d[0]], c(1.0)))
            .unwrap();
        // relabelling-only map is the identity once orders are aligned
        let id = DenseOperator::identity(systems(&["A", "B"]), 3);
        assert!(swap.max_abs_diff(&id).unwrap() < 1e-15);
        let comp = swap.adjoint().compose(&swap).unwrap();
        assert!(comp.max_abs_diff(&id).unwrap() < 1e-15);
    }

    #[test]
    fn hermitian_flag_is_verified() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert!(DenseOperator::local("A".into(), 2, m).unwrap().with_hermitian_flag().is_err());
    }
}
