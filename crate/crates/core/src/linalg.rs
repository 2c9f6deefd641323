//! Minimum-norm solves of symmetric positive semidefinite systems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative cutoff for treating eigenvalues of a Gram matrix as zero.
///
/// The default is `64 · dim · ε`; redundant product columns make every
/// quadratic Gram system singular, so this threshold decides the rank.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PinvPolicy {
    pub rel_tol: Option<f64>,
}

impl PinvPolicy {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        PinvPolicy {
            rel_tol: Some(rel_tol),
        }
    }

    pub fn rel_tol_for(&self, dim: usize) -> f64 {
        self.rel_tol
            .unwrap_or(dim as f64 * f64::EPSILON * 64.0)
    }
}

/// Pseudoinverse of a symmetric matrix from one eigendecomposition.
#[derive(Debug, Clone)]
pub struct SymmetricPinv {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
    inv_values: DVector<f64>,
    cutoff: f64,
    rank: usize,
}

impl SymmetricPinv {
    pub fn new(matrix: &DMatrix<f64>, policy: PinvPolicy) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::input(format!(
                "pseudoinverse needs a square matrix, got {:?}",
                matrix.shape()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("matrix has non-finite entries".into()));
        }
        let dim = matrix.nrows();
        if dim == 0 {
            return Ok(SymmetricPinv {
                vectors: DMatrix::zeros(0, 0),
                values: DVector::zeros(0),
                inv_values: DVector::zeros(0),
                cutoff: 0.0,
                rank: 0,
            });
        }
        let sym = (matrix + matrix.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let largest = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cutoff = policy.rel_tol_for(dim) * largest;
        let inv_values = eig
            .eigenvalues
            .map(|v| if v.abs() > cutoff { 1.0 / v } else { 0.0 });
        let rank = inv_values.iter().filter(|v| **v != 0.0).count();
        Ok(SymmetricPinv {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
            inv_values,
            cutoff,
            rank,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    /// `M⁺ b`.
    pub fn apply(&self, b: &DVector<f64>) -> DVector<f64> {
        let coeffs = self.vectors.tr_mul(b).component_mul(&self.inv_values);
        &self.vectors * coeffs
    }

    /// `M⁺ B` column by column.
    pub fn apply_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut coeffs = self.vectors.tr_mul(b);
        for (mut row, s) in coeffs.row_iter_mut().zip(self.inv_values.iter()) {
            row *= *s;
        }
        &self.vectors * coeffs
    }

    /// Orthonormal basis of the numerical null space, one vector per column.
    pub fn null_space(&self) -> DMatrix<f64> {
        let cols: Vec<usize> = (0..self.dim())
            .filter(|&i| self.inv_values[i] == 0.0)
            .collect();
        self.vectors.select_columns(cols.iter())
    }
}

/// Minimum-norm solution of `M x = b` for symmetric `M`.
pub fn min_norm_solve(matrix: &DMatrix<f64>, b: &DVector<f64>, policy: PinvPolicy) -> Result<DVector<f64>> {
    if b.len() != matrix.nrows() {
        return Err(Error::input(format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            matrix.nrows()
        )));
    }
    Ok(SymmetricPinv::new(matrix, policy)?.apply(b))
}

/// Minimum-norm least-squares solver for `A x ≈ b` from one SVD of `A`.
///
/// The result equals `(AᵀA)⁺ Aᵀ b` but is formed without the normal
/// equations, so the condition number enters only once. Singular values at
/// or below `rel_tol · σ_max` are treated as zero; the default `rel_tol` is
/// `64 · cols · ε`.
#[derive(Debug, Clone)]
pub struct LstsqPinv {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    singular_values: DVector<f64>,
    inv_values: DVector<f64>,
    rank: usize,
}

impl LstsqPinv {
    pub fn new(a: &DMatrix<f64>, policy: PinvPolicy) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("matrix has non-finite entries".into()));
        }
        let (rows, cols) = a.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::input("least-squares matrix is empty"));
        }
        let svd = a.clone().svd(true, true);
        let u = svd.u.ok_or_else(|| Error::Numeric("SVD failed".into()))?;
        let v = svd
            .v_t
            .ok_or_else(|| Error::Numeric("SVD failed".into()))?
            .transpose();
        let sv = svd.singular_values;
        let largest = sv.iter().fold(0.0f64, |m, x| m.max(*x));
        let cutoff = policy.rel_tol_for(cols) * largest;
        let inv_values = sv.map(|x| if x > cutoff { 1.0 / x } else { 0.0 });
        let rank = inv_values.iter().filter(|x| **x != 0.0).count();
        Ok(LstsqPinv {
            u,
            v,
            singular_values: sv,
            inv_values,
            rank,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    /// Orthonormal basis of the numerical null space of `A`.
    pub fn null_space(&self) -> DMatrix<f64> {
        let p = self.v.nrows();
        let kept: Vec<usize> = (0..self.inv_values.len()).filter(|&i| self.inv_values[i] != 0.0).collect();
        let vk = self.v.select_columns(kept.iter());
        // the thin SVD of a wide matrix omits null vectors, so take the
        // complement of the row space
        let proj = DMatrix::identity(p, p) - &vk * vk.transpose();
        let eig = proj.symmetric_eigen();
        let cols: Vec<usize> = (0..p).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        eig.eigenvectors.select_columns(cols.iter())
    }

    /// `A⁺ B`, one solution column per column of `B`.
    pub fn apply_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut coeffs = self.u.tr_mul(b);
        for (mut row, s) in coeffs.row_iter_mut().zip(self.inv_values.iter()) {
            row *= *s;
        }
        &self.v * coeffs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity() {
        let v = min_norm_solve(
            &DMatrix::identity(3, 3),
            &DVector::from_vec(vec![1.0, 0.0, 0.0]),
            PinvPolicy::default(),
        )
        .unwrap();
        assert_eq!(v, DVector::from_vec(vec![1.0, 0.0, 0.0]));
    }

    #[test]
    fn rank_one_min_norm() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = SymmetricPinv::new(&m, PinvPolicy::default()).unwrap();
        assert_eq!(p.rank(), 1);
        let v = p.apply(&DVector::from_vec(vec![2.0, 2.0]));
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);
        let ns = p.null_space();
        assert_eq!(ns.ncols(), 1);
        assert!(ns.column(0).dot(&v).abs() < 1e-14);
    }

    #[test]
    fn apply_matrix_matches_columns() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 1.0, -1.0, 3.0]);
        let p = SymmetricPinv::new(&m, PinvPolicy::default()).unwrap();
        let x = p.apply_matrix(&b);
        for c in 0..2 {
            let xc = p.apply(&b.column(c).into_owned());
            assert!((x.column(c) - xc).norm() < 1e-14);
        }
        assert!((&m * &x - &b).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(SymmetricPinv::new(&DMatrix::zeros(2, 3), PinvPolicy::default()).is_err());
        assert!(min_norm_solve(&DMatrix::identity(2, 2), &DVector::zeros(3), PinvPolicy::default()).is_err());
    }

    #[test]
    fn lstsq_matches_normal_equations() {
        let a = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 3.0, 0.0, 1.0, 1.0, 2.0, 5.0, 7.0, 1.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(4, 1, &[1.0, -1.0, 2.0, 0.5]);
        let x = LstsqPinv::new(&a, PinvPolicy::default()).unwrap().apply_matrix(&b);
        let gram = a.transpose() * &a;
        let y = SymmetricPinv::new(&gram, PinvPolicy::default())
            .unwrap()
            .apply_matrix(&(a.transpose() * &b));
        assert!((x - y).amax() < 1e-10);
    }

    #[test]
    fn lstsq_rank_deficient_is_min_norm() {
        // two identical columns: the solution splits evenly
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(3, 1, &[2.0, 4.0, 0.0]);
        let p = LstsqPinv::new(&a, PinvPolicy::default()).unwrap();
        assert_eq!(p.rank(), 1);
        let x = p.apply_matrix(&b);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        let ns = p.null_space();
        assert_eq!(ns.ncols(), 1);
        assert!((ns[(0, 0)] + ns[(1, 0)]).abs() < 1e-14);
        let wide = LstsqPinv::new(&DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]), PinvPolicy::default()).unwrap();
        assert_eq!(wide.null_space().ncols(), 2);
    }

    #[test]
    fn custom_cutoff() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-6]));
        assert_eq!(SymmetricPinv::new(&m, PinvPolicy::default()).unwrap().rank(), 2);
        assert_eq!(SymmetricPinv::new(&m, PinvPolicy::with_rel_tol(1e-4)).unwrap().rank(), 1);
    }
}
