use nalgebra::DMatrix;
use num_complex::Complex64;

use super::operator::max_abs;
use super::{dimension, ensure_distinct, join, permutation_map, position_of, Context, StateVector, SystemId};
use crate::error::{Error, Result};

const VALIDATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    systems: Vec<SystemId>,
    n: usize,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validated density matrix: Hermitian, unit trace, positive
    /// semidefinite to `1e-10`.
    pub fn new(systems: Vec<SystemId>, n: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let rho = Self::unchecked(systems, n, matrix)?;
        rho.validate(VALIDATION_TOLERANCE)?;
        Ok(rho)
    }

    fn unchecked(systems: Vec<SystemId>, n: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        ensure_distinct(&systems)?;
        let d = dimension(n, systems.len());
        if matrix.shape() != (d, d) {
            return Err(Error::Composition(format!("density matrix shape {:?} for {}", matrix.shape(), join(&systems))));
        }
        Ok(Self { systems, n, matrix })
    }

    pub fn from_state(state: &StateVector) -> Self {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        let matrix = &v * v.adjoint();
        Self { systems: state.systems().to_vec(), n: state.modulus(), matrix }
    }

    /// Convex mixture `Σ p_i |ψ_i⟩⟨ψ_i|` of states on a common registry.
    pub fn mixture(components: &[(f64, StateVector)]) -> Result<Self> {
        let (_, first) = components
            .first()
            .ok_or_else(|| Error::Contract("mixture needs at least one component".into()))?;
        let systems = first.systems().to_vec();
        let d = first.dim();
        let mut m = DMatrix::zeros(d, d);
        for (p, s) in components {
            let s = s.permuted(&systems)?;
            m += DensityMatrix::from_state(&s).matrix * Complex64::new(*p, 0.0);
        }
        Self::new(systems, first.modulus(), m)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let herm = max_abs(&(&self.matrix - self.matrix.adjoint()));
        if herm > tol {
            return Err(Error::Contract(format!("density matrix not Hermitian (deviation {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > tol {
            return Err(Error::Contract(format!("density matrix trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -tol {
            return Err(Error::Contract(format!("density matrix has negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn systems(&self) -> &[SystemId] {
        &self.systems
    }

    pub fn modulus(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    fn hermitian_part(&self) -> DMatrix<Complex64> {
        (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.hermitian_part()).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Eigenvector of the largest eigenvalue together with that eigenvalue,
    /// phase-canonicalized.
    pub fn dominant_eigenvector(&self) -> (f64, StateVector) {
        let (values, vectors) = hermitian_eigen(&self.hermitian_part());
        let idx = values.len() - 1;
        let lambda = values[idx];
        let v = vectors.column(idx).iter().copied().collect();
        let state = StateVector::new(self.systems.clone(), self.n, v, Context::External)
            .expect("eigenvector matches registry")
            .canonicalized();
        (lambda, state)
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with_pure(&self, state: &StateVector) -> Result<f64> {
        let s = state.permuted(&self.systems)?;
        let v = nalgebra::DVector::from_column_slice(s.amplitudes());
        Ok((v.adjoint() * &self.matrix * &v)[(0, 0)].re)
    }

    /// `Tr(ρ O)` for an operator on the same registry.
    pub fn expectation(&self, op: &super::DenseOperator) -> Result<Complex64> {
        let op = op.reordered_square(&self.systems)?;
        Ok((op.matrix() * &self.matrix).trace())
    }

    pub fn permuted(&self, order: &[SystemId]) -> Result<Self> {
        let map = permutation_map(&self.systems, order, self.n)?;
        let m = DMatrix::from_fn(map.len(), map.len(), |i, j| self.matrix[(map[i], map[j])]);
        Ok(Self { systems: order.to_vec(), n: self.n, matrix: m })
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        let other = other.permuted(&self.systems)?;
        Ok(max_abs(&(&self.matrix - &other.matrix)))
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
/// Hermitian matrix.
///
/// Uses faer: nalgebra's symmetric QR returns NaN or infinite values on some
/// exactly sparse, degenerate inputs that tomography produces.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let d = m.nrows();
    let a = faer::Mat::<Complex64>::from_fn(d, d, |i, j| m[(i, j)]);
    let evd = a.self_adjoint_eigen(faer::Side::Lower).expect("self-adjoint eigendecomposition converges");
    let values = (0..d).map(|k| evd.S()[k].re).collect();
    let vectors = DMatrix::from_fn(d, d, |i, j| evd.U()[(i, j)]);
    (values, vectors)
}

/// Reduced state on `keep`, in the order listed.
pub fn partial_trace(rho: &DensityMatrix, keep: &[SystemId]) -> Result<DensityMatrix> {
    ensure_distinct(keep)?;
    for s in keep {
        position_of(&rho.systems, s)?;
    }
    let traced: Vec<SystemId> = rho.systems.iter().filter(|s| !keep.contains(s)).cloned().collect();
    let mut order = keep.to_vec();
    order.extend(traced.iter().cloned());
    let aligned = rho.permuted(&order)?;
    let dk = dimension(rho.n, keep.len());
    let dt = dimension(rho.n, traced.len());
    let m = DMatrix::from_fn(dk, dk, |i, j| (0..dt).map(|t| aligned.matrix[(i * dt + t, j * dt + t)]).sum());
    DensityMatrix::unchecked(keep.to_vec(), rho.n, m)
}
