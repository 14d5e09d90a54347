use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{dimension, ensure_distinct, join, position_of, DenseOperator, SystemId};
use crate::error::{Error, Result};

/// Coefficients below this are dropped from a decomposition.
pub const SCHMIDT_CUTOFF: f64 = 1e-10;

/// One term `λ · left ⊗ right` of an operator-Schmidt decomposition. Factors
/// are orthonormal under the Hilbert–Schmidt inner product.
#[derive(Debug, Clone)]
pub struct SchmidtTerm {
    pub coefficient: f64,
    pub left: DenseOperator,
    pub right: DenseOperator,
}

/// Operator-Schmidt decomposition of a square-registry operator across the
/// cut `left | rest`. Terms are sorted by descending coefficient.
///
/// Hermitian input yields Hermitian factors (flag set). Otherwise the raw
/// SVD factors are returned.
pub fn operator_schmidt_decompose(op: &DenseOperator, left: &[SystemId]) -> Result<Vec<SchmidtTerm>> {
    if !op.is_square_registry() {
        return Err(Error::Composition("Schmidt decomposition needs a square-registry operator".into()));
    }
    ensure_distinct(left)?;
    for s in left {
        position_of(op.in_systems(), s)?;
    }
    let right: Vec<SystemId> = op.in_systems().iter().filter(|s| !left.contains(s)).cloned().collect();
    if left.is_empty() || right.is_empty() {
        return Err(Error::Composition(format!("cut {} of {} is not bipartite", join(left), join(op.in_systems()))));
    }
    let n = op.modulus();
    let mut order = left.to_vec();
    order.extend(right.iter().cloned());
    let aligned = op.reordered_square(&order)?;
    let (dl, dr) = (dimension(n, left.len()), dimension(n, right.len()));
    let reshuffled = reshuffle(aligned.matrix(), dl, dr);

    if op.is_hermitian(SCHMIDT_CUTOFF) {
        hermitian_terms(&reshuffled, left, &right, n, dl, dr)
    } else {
        general_terms(reshuffled, left, &right, n, dl, dr)
    }
}

/// `R[(i,j),(k,l)] = O[(i,k),(j,l)]`, so `O = Σ σ A⊗B` becomes
/// `R = Σ σ vec(A) vec(B)ᵀ` with row-major `vec`.
fn reshuffle(m: &DMatrix<Complex64>, dl: usize, dr: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(dl * dl, dr * dr, |row, col| {
        let (i, j) = (row / dl, row % dl);
        let (k, l) = (col / dr, col % dr);
        m[(i * dr + k, j * dr + l)]
    })
}

fn unvec(v: impl Iterator<Item = Complex64>, d: usize) -> DMatrix<Complex64> {
    let data: Vec<Complex64> = v.collect();
    DMatrix::from_row_slice(d, d, &data)
}

fn general_terms(
    r: DMatrix<Complex64>,
    left: &[SystemId],
    right: &[SystemId],
    n: usize,
    dl: usize,
    dr: usize,
) -> Result<Vec<SchmidtTerm>> {
    let svd = r.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut terms = Vec::new();
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma < SCHMIDT_CUTOFF {
            continue;
        }
        // v_t row k is v_k^†, so conj(v_k)ᵀ is that row as-is
        let a = unvec(u.column(k).iter().copied(), dl);
        let b = unvec(v_t.row(k).iter().copied(), dr);
        terms.push(SchmidtTerm {
            coefficient: sigma,
            left: DenseOperator::square(left.to_vec(), n, a)?,
            right: DenseOperator::square(right.to_vec(), n, b)?,
        });
    }
    sort_terms(&mut terms);
    Ok(terms)
}

/// Columns are `vec(H_m)` for the Hermitian orthonormal basis
/// `E_jj`, `(E_jk + E_kj)/√2`, `i(E_jk − E_kj)/√2`.
pub(crate) fn hermitian_basis(d: usize) -> DMatrix<Complex64> {
    let mut w = DMatrix::zeros(d * d, d * d);
    let mut col = 0;
    for j in 0..d {
        w[(j * d + j, col)] = Complex64::new(1.0, 0.0);
        col += 1;
    }
    for j in 0..d {
        for k in j + 1..d {
            w[(j * d + k, col)] = Complex64::new(FRAC_1_SQRT_2, 0.0);
            w[(k * d + j, col)] = Complex64::new(FRAC_1_SQRT_2, 0.0);
            col += 1;
            w[(j * d + k, col)] = Complex64::new(0.0, FRAC_1_SQRT_2);
            w[(k * d + j, col)] = Complex64::new(0.0, -FRAC_1_SQRT_2);
            col += 1;
        }
    }
    w
}

fn hermitian_terms(
    r: &DMatrix<Complex64>,
    left: &[SystemId],
    right: &[SystemId],
    n: usize,
    dl: usize,
    dr: usize,
) -> Result<Vec<SchmidtTerm>> {
    let wl = hermitian_basis(dl);
    let wr = hermitian_basis(dr);
    // real for Hermitian input: O = Σ c_mn H_m ⊗ G_n
    let c = (wl.adjoint() * r * wr.conjugate()).map(|z| z.re);
    let svd = c.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut terms = Vec::new();
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma < SCHMIDT_CUTOFF {
            continue;
        }
        let a_vec = &wl * u.column(k).map(|x| Complex64::new(x, 0.0));
        let b_vec = &wr * v_t.row(k).transpose().map(|x| Complex64::new(x, 0.0));
        let a = DenseOperator::square(left.to_vec(), n, unvec(a_vec.iter().copied(), dl))?.with_hermitian_flag()?;
        let b = DenseOperator::square(right.to_vec(), n, unvec(b_vec.iter().copied(), dr))?.with_hermitian_flag()?;
        terms.push(SchmidtTerm { coefficient: sigma, left: a, right: b });
    }
    sort_terms(&mut terms);
    Ok(terms)
}

fn sort_terms(terms: &mut [SchmidtTerm]) {
    terms.sort_by(|a, b| b.coefficient.total_cmp(&a.coefficient));
}

/// `Σ λ_k left_k ⊗ right_k`, expressed on `order`.
pub fn schmidt_recompose(terms: &[SchmidtTerm], order: &[SystemId]) -> Result<DenseOperator> {
    let first = terms.first().ok_or_else(|| Error::Contract("no Schmidt terms to recompose".into()))?;
    let n = first.left.modulus();
    let d = dimension(n, order.len());
    let mut acc = DenseOperator::square(order.to_vec(), n, DMatrix::zeros(d, d))?;
    for t in terms {
        let term = t.left.tensor(&t.right)?.scaled(Complex64::new(t.coefficient, 0.0));
        acc = acc.linear_combination(Complex64::new(1.0, 0.0), &term, Complex64::new(1.0, 0.0))?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::systems;

    fn diag(system: &str, n: usize, f: impl Fn(usize) -> f64) -> DenseOperator {
        DenseOperator::diagonal(systems(&[system]), n, |d| Complex64::new(f(d[0]), 0.0)).unwrap()
    }

    fn normalized(op: DenseOperator) -> DenseOperator {
        let norm = op.hs_norm();
        op.scaled(Complex64::new(1.0 / norm, 0.0))
    }

    #[test]
    fn rank_one_product() {
        let b = normalized(diag("B", 3, |x| x as f64 - 1.0));
        let c = normalized(diag("C", 3, |x| (x * x) as f64 + 0.5));
        let terms = operator_schmidt_decompose(&b.tensor(&c).unwrap(), &systems(&["B"])).unwrap();
        assert_eq!(terms.len(), 1);
        assert!((terms[0].coefficient - 1.0).abs() < 1e-12);
        assert!(terms[0].left.hermitian_flag());
    }

    #[test]
    fn difference_of_positions_has_two_terms() {
        let x_b = diag("B", 4, |x| x as f64);
        let x_d = diag("D", 4, |x| x as f64);
        let id_b = DenseOperator::identity(systems(&["B"]), 4);
        let id_d = DenseOperator::identity(systems(&["D"]), 4);
        let op = x_b
            .tensor(&id_d)
            .unwrap()
            .linear_combination(Complex64::new(1.0, 0.0), &id_b.tensor(&x_d).unwrap(), Complex64::new(-1.0, 0.0))
            .unwrap();
        let terms = operator_schmidt_decompose(&op, &systems(&["B"])).unwrap();
        assert_eq!(terms.len(), 2);
        let back = schmidt_recompose(&terms, &systems(&["B", "D"])).unwrap();
        assert!(back.max_abs_diff(&op).unwrap() < 1e-12);
    }

    #[test]
    fn bad_cuts_rejected() {
        let op = DenseOperator::identity(systems(&["B", "C"]), 2);
        assert!(operator_schmidt_decompose(&op, &[]).is_err());
        assert!(operator_schmidt_decompose(&op, &systems(&["B", "C"])).is_err());
        assert!(operator_schmidt_decompose(&op, &systems(&["Q"])).is_err());
    }

    #[test]
    fn non_hermitian_reconstructs() {
        let m = DMatrix::from_fn(4, 4, |i, j| Complex64::new((i * 4 + j) as f64, (i as f64 - j as f64).sin()));
        let op = DenseOperator::square(systems(&["B", "C"]), 2, m).unwrap();
        let terms = operator_schmidt_decompose(&op, &systems(&["C"])).unwrap();
        let back = schmidt_recompose(&terms, &systems(&["B", "C"])).unwrap();
        assert!(back.max_abs_diff(&op).unwrap() < 1e-10);
    }
}
