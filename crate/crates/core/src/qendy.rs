//! Least-squares identification of quadratic embeddings.
//!
//! Given samples `(x⁽ᵏ⁾, ẋ⁽ᵏ⁾)` and a dictionary `φ`, the lifted data
//! `z⁽ᵏ⁾ = φ(x⁽ᵏ⁾)`, `ż⁽ᵏ⁾ = J(x⁽ᵏ⁾) ẋ⁽ᵏ⁾` are fitted by
//!
//! ```text
//! ż = A (z ⊗ z) + B z + C
//! ```
//!
//! minimising `‖Ż − A Z₂ − B Z₁ − C 𝟙ᵀ‖²_F + λ ‖A‖²_F`. The normal
//! equations decouple into `N` systems that share the symmetric matrix `R`
//! of size `N² + N + 1`; each row `[A_ℓ, B_ℓ, C_ℓ]` is the minimum-norm
//! solution `R⁺ s_ℓ`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dictionary::Dictionary;
use crate::dynamics::TrainingSet;
use crate::error::{Error, Result};
use crate::linalg::{LstsqPinv, PinvPolicy, SymmetricPinv};
use crate::quadmodel::{kron, ModelMeta, QuadraticModel};

/// Lifted training data, one sample per column.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrices {
    /// `N × m`, columns `φ(x⁽ᵏ⁾)`.
    pub z1: DMatrix<f64>,
    /// `N² × m`, columns `z⁽ᵏ⁾ ⊗ z⁽ᵏ⁾`.
    pub z2: DMatrix<f64>,
    /// `N × m`, columns `J(x⁽ᵏ⁾) ẋ⁽ᵏ⁾`.
    pub zdot: DMatrix<f64>,
}

impl DataMatrices {
    pub fn basis_len(&self) -> usize {
        self.z1.nrows()
    }

    pub fn samples(&self) -> usize {
        self.z1.ncols()
    }

    /// `[Z₂; Z₁; 𝟙ᵀ]`, i.e. the augmented features of every sample.
    pub fn augmented(&self) -> DMatrix<f64> {
        let n = self.basis_len();
        let m = self.samples();
        let p = n * n + n + 1;
        let mut w = DMatrix::zeros(p, m);
        w.rows_mut(0, n * n).copy_from(&self.z2);
        w.rows_mut(n * n, n).copy_from(&self.z1);
        w.row_mut(p - 1).fill(1.0);
        w
    }
}

pub fn build_data_matrices(d: &Dictionary, ts: &TrainingSet) -> Result<DataMatrices> {
    if ts.dim() != d.state_dim() {
        return Err(Error::input(format!(
            "training data has dimension {}, dictionary expects {}",
            ts.dim(),
            d.state_dim()
        )));
    }
    let n = d.len();
    let m = ts.len();
    let mut z1 = DMatrix::zeros(n, m);
    let mut z2 = DMatrix::zeros(n * n, m);
    let mut zdot = DMatrix::zeros(n, m);
    for k in 0..m {
        let (z, zd) = d
            .feature_map_with_derivative(&ts.state(k), &ts.derivative(k))
            .map_err(|e| Error::Sample {
                index: k,
                source: Box::new(e),
            })?;
        z1.column_mut(k).copy_from_slice(&z);
        zdot.column_mut(k).copy_from_slice(&zd);
        z2.column_mut(k).copy_from_slice(&kron(&z));
    }
    Ok(DataMatrices { z1, z2, zdot })
}

/// Normal equations shared by all rows: `R v_ℓ = s_ℓ`.
///
/// Block order of `R` is products, singletons, constant. With
/// `force_c_zero` the constant row and column are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    pub r: DMatrix<f64>,
    /// Column `ℓ` is `s_ℓ`.
    pub s: DMatrix<f64>,
    pub lambda: f64,
    pub m: usize,
    basis_len: usize,
    with_constant: bool,
}

pub fn assemble_gram(dm: &DataMatrices, lambda: f64) -> Result<GramSystem> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::config(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let n = dm.basis_len();
    let w = dm.augmented();
    let mut r = &w * w.transpose();
    for i in 0..n * n {
        r[(i, i)] += lambda;
    }
    let s = &w * dm.zdot.transpose();
    Ok(GramSystem {
        r,
        s,
        lambda,
        m: dm.samples(),
        basis_len: n,
        with_constant: true,
    })
}

impl GramSystem {
    pub fn basis_len(&self) -> usize {
        self.basis_len
    }

    pub fn has_constant(&self) -> bool {
        self.with_constant
    }

    /// Drops the constant row and column, pinning `C = 0`.
    pub fn without_constant(&self) -> GramSystem {
        if !self.with_constant {
            return self.clone();
        }
        let p = self.r.nrows() - 1;
        GramSystem {
            r: self.r.view((0, 0), (p, p)).into_owned(),
            s: self.s.rows(0, p).into_owned(),
            lambda: self.lambda,
            m: self.m,
            basis_len: self.basis_len,
            with_constant: false,
        }
    }

    pub fn factor(&self, policy: PinvPolicy) -> Result<FactoredGram<'_>> {
        Ok(FactoredGram {
            gram: self,
            pinv: SymmetricPinv::new(&self.r, policy)?,
        })
    }

    /// Assembles `v_ℓ` for every row into `(A, B, C)`.
    fn unpack(&self, v: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let n = self.basis_len;
        let nn = n * n;
        let a = v.rows(0, nn).transpose();
        let b = v.rows(nn, n).transpose();
        let c = if self.with_constant {
            v.row(nn + n).transpose()
        } else {
            DVector::zeros(n)
        };
        (a, b, c)
    }
}

/// A Gram system with its pseudoinverse computed once.
pub struct FactoredGram<'a> {
    gram: &'a GramSystem,
    pinv: SymmetricPinv,
}

impl FactoredGram<'_> {
    pub fn pinv(&self) -> &SymmetricPinv {
        &self.pinv
    }

    /// `v_ℓ = R⁺ s_ℓ` for the 0-based row `ell`.
    pub fn solve_row(&self, ell: usize) -> Result<DVector<f64>> {
        if ell >= self.gram.basis_len {
            return Err(Error::input(format!(
                "row {ell} out of range for {} basis functions",
                self.gram.basis_len
            )));
        }
        Ok(self.pinv.apply(&self.gram.s.column(ell).into_owned()))
    }

    /// All rows; column `ℓ` of the result is `v_ℓ`.
    pub fn solve_all(&self) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = (0..self.gram.basis_len)
            .into_par_iter()
            .map(|ell| self.pinv.apply(&self.gram.s.column(ell).into_owned()))
            .collect();
        DMatrix::from_columns(&cols)
    }
}

/// How the minimum-norm solution is computed. Both give `R⁺ s_ℓ` in exact
/// arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    /// SVD of the stacked data matrix `[Wᵀ; √λ (I 0)]`.
    #[default]
    DataSvd,
    /// Eigendecomposition of the assembled Gram matrix `R`.
    Gram,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub lambda: f64,
    pub force_c_zero: bool,
    pub pinv: PinvPolicy,
    pub solver: Solver,
}

impl FitOptions {
    pub fn lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn force_c_zero(mut self, on: bool) -> Self {
        self.force_c_zero = on;
        self
    }

    pub fn solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }
}

/// Fits `(A, B, C)` by a least-squares solve on the data matrices, the
/// regulariser entering as extra rows `√λ e_i` for the product block.
pub fn fit_from_data(
    d: &Dictionary,
    dm: &DataMatrices,
    opts: &FitOptions,
    meta: ModelMeta,
) -> Result<QuadraticModel> {
    if !(opts.lambda >= 0.0) || !opts.lambda.is_finite() {
        return Err(Error::config(format!("lambda must be finite and >= 0, got {}", opts.lambda)));
    }
    let n = dm.basis_len();
    let nn = n * n;
    let m = dm.samples();
    let mut w = dm.augmented();
    if opts.force_c_zero {
        w = w.remove_row(nn + n);
    }
    let p = w.nrows();
    let reg_rows = if opts.lambda > 0.0 { nn } else { 0 };
    let mut design = DMatrix::zeros(m + reg_rows, p);
    design.rows_mut(0, m).copy_from(&w.transpose());
    let mut rhs = DMatrix::zeros(m + reg_rows, n);
    rhs.rows_mut(0, m).copy_from(&dm.zdot.transpose());
    let root = opts.lambda.sqrt();
    for i in 0..reg_rows {
        design[(m + i, i)] = root;
    }
    let v = LstsqPinv::new(&design, opts.pinv)?.apply_matrix(&rhs);
    let a = v.rows(0, nn).transpose();
    let b = v.rows(nn, n).transpose();
    let c = if opts.force_c_zero {
        DVector::zeros(n)
    } else {
        v.row(nn + n).transpose()
    };
    let g = d.full_state_matrix()?;
    QuadraticModel::new(d.clone(), a, b, c, g, meta)
}

/// Fits `(A, B, C)` from a gram system already assembled from `dm`.
pub fn fit_from_gram(
    d: &Dictionary,
    gram: &GramSystem,
    opts: &FitOptions,
    meta: ModelMeta,
) -> Result<QuadraticModel> {
    let reduced;
    let system = if opts.force_c_zero {
        reduced = gram.without_constant();
        &reduced
    } else {
        gram
    };
    let v = system.factor(opts.pinv)?.solve_all();
    let (a, b, c) = system.unpack(&v);
    let g = d.full_state_matrix()?;
    QuadraticModel::new(d.clone(), a, b, c, g, meta)
}

pub fn fit(d: &Dictionary, ts: &TrainingSet, opts: &FitOptions) -> Result<QuadraticModel> {
    // fail early on a missing projection before doing any work
    d.full_state_matrix()?;
    let dm = build_data_matrices(d, ts)?;
    let meta = ModelMeta {
        m: ts.len(),
        lambda: opts.lambda,
        force_c_zero: opts.force_c_zero,
        provenance: ts.provenance(),
    };
    match opts.solver {
        Solver::DataSvd => fit_from_data(d, &dm, opts, meta),
        Solver::Gram => fit_from_gram(d, &assemble_gram(&dm, opts.lambda)?, opts, meta),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss {
    /// `‖Ż − A Z₂ − B Z₁ − C 𝟙ᵀ‖²_F`.
    pub residual: f64,
    /// `residual + λ ‖A‖²_F`.
    pub regularized: f64,
}

fn check_dims(model: &QuadraticModel, dm: &DataMatrices) -> Result<()> {
    if model.basis_len() != dm.basis_len() {
        return Err(Error::input(format!(
            "model has {} basis functions, data has {}",
            model.basis_len(),
            dm.basis_len()
        )));
    }
    Ok(())
}

/// `Ż − A Z₂ − B Z₁ − C 𝟙ᵀ`.
pub fn residual(model: &QuadraticModel, dm: &DataMatrices) -> Result<DMatrix<f64>> {
    check_dims(model, dm)?;
    let mut res = &dm.zdot - model.a() * &dm.z2 - model.b() * &dm.z1;
    for mut col in res.column_iter_mut() {
        col -= model.c();
    }
    Ok(res)
}

pub fn loss(model: &QuadraticModel, dm: &DataMatrices, lambda: f64) -> Result<Loss> {
    let residual = residual(model, dm)?.norm_squared();
    Ok(Loss {
        residual,
        regularized: residual + lambda * model.a().norm_squared(),
    })
}

/// Gradient of the (regularised) loss with respect to `A`, `B` and `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl LossGradient {
    pub fn max_abs(&self) -> f64 {
        self.a
            .amax()
            .max(self.b.amax())
            .max(if self.c.is_empty() { 0.0 } else { self.c.amax() })
    }
}

/// Closed-form derivatives
///
/// ```text
/// ∂L/∂A = 2 (A Z₂Z₂ᵀ − Ż Z₂ᵀ + B Z₁Z₂ᵀ + C 𝟙ᵀZ₂ᵀ) + 2λA
/// ∂L/∂B = 2 (B Z₁Z₁ᵀ − Ż Z₁ᵀ + A Z₂Z₁ᵀ + C 𝟙ᵀZ₁ᵀ)
/// ∂L/∂C = 2 (m C − Ż 𝟙 + A Z₂ 𝟙 + B Z₁ 𝟙)
/// ```
pub fn loss_gradient(model: &QuadraticModel, dm: &DataMatrices, lambda: f64) -> Result<LossGradient> {
    check_dims(model, dm)?;
    let (a, b, c) = (model.a(), model.b(), model.c());
    let m = dm.samples() as f64;
    let z2t = dm.z2.transpose();
    let z1t = dm.z1.transpose();
    let sum2 = DVector::from_iterator(dm.z2.nrows(), dm.z2.row_iter().map(|r| r.sum()));
    let sum1 = DVector::from_iterator(dm.z1.nrows(), dm.z1.row_iter().map(|r| r.sum()));
    let sumdot = DVector::from_iterator(dm.zdot.nrows(), dm.zdot.row_iter().map(|r| r.sum()));

    let ga = (a * (&dm.z2 * &z2t) - &dm.zdot * &z2t + b * (&dm.z1 * &z2t) + c * sum2.transpose()) * 2.0
        + a * (2.0 * lambda);
    let gb = (b * (&dm.z1 * &z1t) - &dm.zdot * &z1t + a * (&dm.z2 * &z1t) + c * sum1.transpose()) * 2.0;
    let mut gc = (c * m - sumdot + a * sum2 + b * sum1) * 2.0;
    if model.meta().force_c_zero {
        // C is pinned, so its partial derivative is not a stationarity condition
        gc.fill(0.0);
    }
    Ok(LossGradient { a: ga, b: gb, c: gc })
}
