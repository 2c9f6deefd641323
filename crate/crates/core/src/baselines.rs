//! SINDy and gEDMD least-squares fits on a dictionary.
//!
//! Both use the same minimum-norm least-squares solve as the quadratic fit,
//! so differences between methods come from the ansatz only.

use nalgebra::{Complex, DMatrix, DVector};

use crate::dictionary::Dictionary;
use crate::dynamics::TrainingSet;
use crate::error::{Error, Result};
use crate::linalg::{LstsqPinv, PinvPolicy};

/// `ẋ = Ξ φ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SindyModel {
    dict: Dictionary,
    xi: DMatrix<f64>,
}

impl SindyModel {
    pub fn new(dict: Dictionary, xi: DMatrix<f64>) -> Result<Self> {
        if xi.shape() != (dict.state_dim(), dict.len()) {
            return Err(Error::input(format!(
                "Xi must be {}x{}, got {:?}",
                dict.state_dim(),
                dict.len(),
                xi.shape()
            )));
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("Xi is not finite".into()));
        }
        Ok(SindyModel { dict, xi })
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn xi(&self) -> &DMatrix<f64> {
        &self.xi
    }

    pub fn rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let phi = DVector::from_vec(self.dict.feature_map(x)?);
        Ok((&self.xi * phi).as_slice().to_vec())
    }

    /// `‖Ẋ − Ξ Φ_X‖²_F` on a training set.
    pub fn residual(&self, ts: &TrainingSet) -> Result<f64> {
        let phi = feature_matrix(&self.dict, ts)?;
        Ok((ts.derivatives().transpose() - &self.xi * phi).norm_squared())
    }
}

impl crate::dynamics::VectorField for SindyModel {
    fn dim(&self) -> usize {
        self.dict.state_dim()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.rhs(x)
    }
}

/// `Φ_X`, one column `φ(x⁽ᵏ⁾)` per sample.
pub fn feature_matrix(d: &Dictionary, ts: &TrainingSet) -> Result<DMatrix<f64>> {
    check_dim(d, ts)?;
    let mut phi = DMatrix::zeros(d.len(), ts.len());
    for k in 0..ts.len() {
        let z = d.feature_map(&ts.state(k)).map_err(|e| Error::Sample {
            index: k,
            source: Box::new(e),
        })?;
        phi.column_mut(k).copy_from_slice(&z);
    }
    Ok(phi)
}

/// `Φ_X` and `Φ̇_X` whose columns are `J(x⁽ᵏ⁾) ẋ⁽ᵏ⁾`.
pub fn feature_matrices_with_derivative(d: &Dictionary, ts: &TrainingSet) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_dim(d, ts)?;
    let mut phi = DMatrix::zeros(d.len(), ts.len());
    let mut dphi = DMatrix::zeros(d.len(), ts.len());
    for k in 0..ts.len() {
        let (z, zd) = d
            .feature_map_with_derivative(&ts.state(k), &ts.derivative(k))
            .map_err(|e| Error::Sample {
                index: k,
                source: Box::new(e),
            })?;
        phi.column_mut(k).copy_from_slice(&z);
        dphi.column_mut(k).copy_from_slice(&zd);
    }
    Ok((phi, dphi))
}

fn check_dim(d: &Dictionary, ts: &TrainingSet) -> Result<()> {
    if ts.dim() != d.state_dim() {
        return Err(Error::input(format!(
            "training data has dimension {}, dictionary expects {}",
            ts.dim(),
            d.state_dim()
        )));
    }
    if ts.is_empty() {
        return Err(Error::input("training set is empty"));
    }
    Ok(())
}

/// Minimum-norm `Ξ` from `Φ Φᵀ Ξᵀ = Φ Ẋᵀ`. With `threshold`, entries below
/// it are zeroed once and each row is refitted on its remaining columns.
pub fn sindy_fit(d: &Dictionary, ts: &TrainingSet, threshold: Option<f64>) -> Result<SindyModel> {
    let design = feature_matrix(d, ts)?.transpose();
    let mut xi = LstsqPinv::new(&design, PinvPolicy::default())?
        .apply_matrix(ts.derivatives())
        .transpose();
    if let Some(thr) = threshold {
        if !(thr >= 0.0) {
            return Err(Error::config("threshold must be non-negative"));
        }
        for l in 0..xi.nrows() {
            let keep: Vec<usize> = (0..xi.ncols()).filter(|&j| xi[(l, j)].abs() >= thr).collect();
            let mut row = DVector::zeros(xi.ncols());
            if !keep.is_empty() {
                let sub = design.select_columns(keep.iter());
                let b = ts.derivatives().column(l).into_owned();
                let sol = LstsqPinv::new(&sub, PinvPolicy::default())?.apply_matrix(&DMatrix::from_column_slice(b.len(), 1, b.as_slice()));
                for (&j, v) in keep.iter().zip(sol.iter()) {
                    row[j] = *v;
                }
            }
            xi.row_mut(l).copy_from(&row.transpose());
        }
    }
    SindyModel::new(d.clone(), xi)
}

/// Galerkin approximation of the Koopman generator: `Φ̇_X ≈ Θ Φ_X`.
#[derive(Debug, Clone, PartialEq)]
pub struct GedmdModel {
    dict: Dictionary,
    theta: DMatrix<f64>,
}

/// Minimum-norm `Θ` from `Φ Φᵀ Θᵀ = Φ Φ̇ᵀ`.
pub fn gedmd_fit(d: &Dictionary, ts: &TrainingSet) -> Result<GedmdModel> {
    let (phi, dphi) = feature_matrices_with_derivative(d, ts)?;
    let theta_t = LstsqPinv::new(&phi.transpose(), PinvPolicy::default())?.apply_matrix(&dphi.transpose());
    GedmdModel::new(d.clone(), theta_t.transpose())
}

impl GedmdModel {
    pub fn new(dict: Dictionary, theta: DMatrix<f64>) -> Result<Self> {
        let n = dict.len();
        if theta.shape() != (n, n) {
            return Err(Error::input(format!("Theta must be {n}x{n}, got {:?}", theta.shape())));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("Theta is not finite".into()));
        }
        Ok(GedmdModel { dict, theta })
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    /// `ẋ ≈ G Θ φ(x)` as a SINDy-form model.
    pub fn identify(&self) -> Result<SindyModel> {
        let g = self.dict.full_state_matrix()?;
        SindyModel::new(self.dict.clone(), g * &self.theta)
    }

    /// Eigenpairs `Θᵀ v = λ v`; `f(x) = vᵀ φ(x)` then satisfies
    /// `L f ≈ λ f`. Vectors are scaled so their largest entry is `1`.
    pub fn koopman_eigenfunctions(&self) -> Result<Vec<KoopmanEigenpair>> {
        let n = self.theta.nrows();
        let tt = self.theta.transpose();
        let values = tt.complex_eigenvalues();
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numeric("eigenvalues of Theta did not converge".into()));
        }
        let ttc = tt.map(|v| Complex::new(v, 0.0));
        let mut out = Vec::with_capacity(n);
        for lam in values.iter() {
            let shifted = &ttc - DMatrix::<Complex<f64>>::identity(n, n) * *lam;
            let svd = shifted.svd(false, true);
            let v_t = svd
                .v_t
                .ok_or_else(|| Error::Numeric("eigenvector computation failed".into()))?;
            let k = (0..n)
                .min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))
                .expect("n >= 1");
            let v: Vec<Complex<f64>> = v_t.row(k).iter().map(|c| c.conj()).collect();
            let pivot = *v
                .iter()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .expect("n >= 1");
            let coefficients: Vec<Complex<f64>> = v.iter().map(|c| c / pivot).collect();
            out.push(KoopmanEigenpair {
                eigenvalue: *lam,
                coefficients,
            });
        }
        out.sort_by(|p, q| {
            p.eigenvalue
                .re
                .total_cmp(&q.eigenvalue.re)
                .then(p.eigenvalue.im.total_cmp(&q.eigenvalue.im))
        });
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanEigenpair {
    pub eigenvalue: Complex<f64>,
    pub coefficients: Vec<Complex<f64>>,
}

impl KoopmanEigenpair {
    /// `vᵀ φ(x)`.
    pub fn eval(&self, d: &Dictionary, x: &[f64]) -> Result<Complex<f64>> {
        let phi = d.feature_map(x)?;
        Ok(self.coefficients.iter().zip(&phi).map(|(c, p)| c * *p).sum())
    }

    /// `vᵀ J(x) ẋ`, the generator applied to the eigenfunction.
    pub fn eval_generator(&self, d: &Dictionary, x: &[f64], xdot: &[f64]) -> Result<Complex<f64>> {
        let (_, dphi) = d.feature_map_with_derivative(x, xdot)?;
        Ok(self.coefficients.iter().zip(&dphi).map(|(c, p)| c * *p).sum())
    }
}
