//! The learned quadratic model `ż = A (z ⊗ z) + B z + C` with `x = G z`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::dynamics::{rk4_integrate_partial, Provenance, Trajectory, VectorField};
use crate::error::{Error, Result};

/// `z ⊗ z`, entry `N·i + j` is `z_i z_j` (0-based).
pub fn kron(z: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len() * z.len());
    for &zi in z {
        out.extend(z.iter().map(|zj| zi * zj));
    }
    out
}

/// How a model was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub m: usize,
    pub lambda: f64,
    #[serde(default)]
    pub force_c_zero: bool,
    pub provenance: Provenance,
}

impl Default for ModelMeta {
    fn default() -> Self {
        ModelMeta {
            m: 0,
            lambda: 0.0,
            force_c_zero: false,
            provenance: Provenance::External,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    dict: Dictionary,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DVector<f64>,
    g: DMatrix<f64>,
    meta: ModelMeta,
}

impl QuadraticModel {
    pub fn new(
        dict: Dictionary,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DVector<f64>,
        g: DMatrix<f64>,
        meta: ModelMeta,
    ) -> Result<Self> {
        let n = dict.len();
        let d = dict.state_dim();
        if a.shape() != (n, n * n) {
            return Err(Error::input(format!("A must be {n}x{}, got {:?}", n * n, a.shape())));
        }
        if b.shape() != (n, n) {
            return Err(Error::input(format!("B must be {n}x{n}, got {:?}", b.shape())));
        }
        if c.len() != n {
            return Err(Error::input(format!("C must have length {n}, got {}", c.len())));
        }
        if g.shape() != (d, n) {
            return Err(Error::input(format!("G must be {d}x{n}, got {:?}", g.shape())));
        }
        let finite = a.iter().chain(b.iter()).chain(c.iter()).chain(g.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numeric("model coefficients are not finite".into()));
        }
        Ok(QuadraticModel { dict, a, b, c, g, meta })
    }

    /// `A = B = C = 0` with the dictionary's own projection.
    pub fn zero(dict: Dictionary, meta: ModelMeta) -> Result<Self> {
        let n = dict.len();
        let g = dict.full_state_matrix()?;
        Self::new(dict, DMatrix::zeros(n, n * n), DMatrix::zeros(n, n), DVector::zeros(n), g, meta)
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn basis_len(&self) -> usize {
        self.dict.len()
    }

    pub fn state_dim(&self) -> usize {
        self.dict.state_dim()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>> {
        let n = self.basis_len();
        if z.len() != n {
            return Err(Error::input(format!("z has length {}, model expects {n}", z.len())));
        }
        let zz = DVector::from_vec(kron(z));
        let zv = DVector::from_column_slice(z);
        let out = &self.a * zz + &self.b * zv + &self.c;
        Ok(out.as_slice().to_vec())
    }

    /// `ẋ = G (A (φ ⊗ φ) + B φ + C)` at `x`.
    pub fn extract_rhs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.dict.feature_map(x)?;
        let zdot = DVector::from_vec(self.evaluate(&z)?);
        Ok((&self.g * zdot).as_slice().to_vec())
    }

    /// `x = G z`.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        (&self.g * DVector::from_column_slice(z)).as_slice().to_vec()
    }

    /// Replaces every row of `A`, viewed as an `N × N` matrix, by its
    /// symmetric part. The model's values are unchanged.
    pub fn symmetrize(&self) -> QuadraticModel {
        let n = self.basis_len();
        let mut a = self.a.clone();
        for l in 0..n {
            for i in 0..n {
                for j in (i + 1)..n {
                    let avg = 0.5 * (self.a[(l, n * i + j)] + self.a[(l, n * j + i)]);
                    a[(l, n * i + j)] = avg;
                    a[(l, n * j + i)] = avg;
                }
            }
        }
        QuadraticModel { a, ..self.clone() }
    }

    pub fn hurwitz_margin(&self) -> Result<Hurwitz> {
        let eig = self.b.complex_eigenvalues();
        if eig.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numeric("eigenvalues of B did not converge".into()));
        }
        let max_real_part = eig.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max);
        let mut spectrum: Vec<(f64, f64)> = eig.iter().map(|v| (v.re, v.im)).collect();
        spectrum.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
        Ok(Hurwitz {
            stable: max_real_part < 0.0,
            max_real_part,
            spectrum,
            a_frobenius: self.a.norm(),
        })
    }

    pub fn sparsity_report(&self, threshold: f64) -> SparsityReport {
        let count_row = |m: &DMatrix<f64>, r: usize| m.row(r).iter().filter(|v| v.abs() > threshold).count();
        let n = self.basis_len();
        let a_rows: Vec<usize> = (0..n).map(|r| count_row(&self.a, r)).collect();
        let b_rows: Vec<usize> = (0..n).map(|r| count_row(&self.b, r)).collect();
        SparsityReport {
            threshold,
            a: a_rows.iter().sum(),
            b: b_rows.iter().sum(),
            c: self.c.iter().filter(|v| v.abs() > threshold).count(),
            a_rows,
            b_rows,
            max_abs_c: self.c.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Integrates in feature space from `z0 = φ(x0)`. The basis functions are
    /// not evaluated again unless `opts.reembed` is set.
    pub fn simulate(&self, x0: &[f64], t_end: f64, dt: f64) -> Result<Simulation> {
        let sim = self.simulate_with(x0, t_end, dt, SimulateOptions::default())?;
        match sim.blowup {
            Some(step) => Err(Error::Blowup {
                step,
                time: step as f64 * dt,
            }),
            None => Ok(sim),
        }
    }

    /// Like [`simulate`](Self::simulate) but returns the part computed
    /// before a blowup instead of an error.
    pub fn simulate_with(&self, x0: &[f64], t_end: f64, dt: f64, opts: SimulateOptions) -> Result<Simulation> {
        if !(dt > 0.0) || !(t_end >= dt) || !t_end.is_finite() {
            return Err(Error::config("need 0 < dt <= t_end"));
        }
        let steps = (t_end / dt).round() as usize;
        let z0 = self.dict.feature_map(x0)?;
        let z = if opts.reembed {
            self.reembedded(&z0, steps, dt)?
        } else {
            rk4_integrate_partial(&ZSpace(self), &z0, steps, dt, 1)?
        };
        let x_states = z.trajectory.states() * self.g.transpose();
        let x = Trajectory::new(z.trajectory.times().to_vec(), x_states)?;
        Ok(Simulation {
            x,
            z: z.trajectory,
            blowup: z.blowup,
        })
    }

    fn reembedded(&self, z0: &[f64], steps: usize, dt: f64) -> Result<crate::dynamics::Integration> {
        let n = self.basis_len();
        let mut z = z0.to_vec();
        let mut times = vec![0.0];
        let mut data = z.clone();
        let mut blowup = None;
        for step in 1..=steps {
            let next = rk4_integrate_partial(&ZSpace(self), &z, 1, dt, 1)?;
            let stepped = next.blowup.is_none().then(|| next.trajectory.last_state());
            let projected = stepped.and_then(|s| self.dict.feature_map(&self.project(&s)).ok());
            match projected {
                Some(p) if p.iter().all(|v| v.is_finite()) => z = p,
                _ => {
                    blowup = Some(step);
                    break;
                }
            }
            times.push(step as f64 * dt);
            data.extend_from_slice(&z);
        }
        let states = DMatrix::from_row_slice(times.len(), n, &data);
        Ok(crate::dynamics::Integration {
            trajectory: Trajectory::new(times, states)?,
            blowup,
        })
    }
}

/// The model as a vector field on feature space.
pub struct ZSpace<'a>(pub &'a QuadraticModel);

impl VectorField for ZSpace<'_> {
    fn dim(&self) -> usize {
        self.0.basis_len()
    }

    fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.0.evaluate(z)
    }
}

/// The extracted equations `ẋ = G ż(φ(x))` as a vector field on state space.
impl VectorField for QuadraticModel {
    fn dim(&self) -> usize {
        self.state_dim()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.extract_rhs(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimulateOptions {
    /// Replace `z` by `φ(G z)` after every step.
    pub reembed: bool,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub x: Trajectory,
    pub z: Trajectory,
    pub blowup: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hurwitz {
    pub stable: bool,
    pub max_real_part: f64,
    /// Eigenvalues of `B` as `(re, im)`, sorted.
    pub spectrum: Vec<(f64, f64)>,
    pub a_frobenius: f64,
}

/// Number of entries with `|v| > threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityReport {
    pub threshold: f64,
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub a_rows: Vec<usize>,
    pub b_rows: Vec<usize>,
    pub max_abs_c: f64,
}

pub const DEFAULT_SPARSITY_THRESHOLD: f64 = 1e-6;

/// Hand-built embeddings whose quadratic form is exact.
pub mod exact {
    use super::*;
    use crate::dictionary::builtin;

    fn a_entry(a: &mut DMatrix<f64>, n: usize, row: usize, i: usize, j: usize, v: f64) {
        a[(row, n * i + j)] += v;
    }

    /// Pendulum with damping `c` on `[x₁, x₂, sin x₁, cos x₁]`:
    /// `ż = [z₂, −c z₂ − z₃, z₂ z₄, −z₂ z₃]`.
    pub fn pendulum(c: f64) -> QuadraticModel {
        let n = 4;
        let mut a = DMatrix::zeros(n, n * n);
        let mut b = DMatrix::zeros(n, n);
        b[(0, 1)] = 1.0;
        b[(1, 1)] = -c;
        b[(1, 2)] = -1.0;
        a_entry(&mut a, n, 2, 1, 3, 1.0);
        a_entry(&mut a, n, 3, 1, 2, -1.0);
        let d = builtin::pendulum();
        let g = d.full_state_matrix().expect("pendulum dictionary contains x1, x2");
        QuadraticModel::new(d, a, b, DVector::zeros(n), g, ModelMeta::default()).expect("consistent shapes")
    }

    /// `ẋ = −x/(1+x)` on `[x, 1/(1+x), x/(1+x)²]`:
    /// `ż = [−z₁z₂, z₂z₃, −z₂z₃ + 2z₃²]`.
    pub fn rational() -> QuadraticModel {
        let n = 3;
        let mut a = DMatrix::zeros(n, n * n);
        a_entry(&mut a, n, 0, 0, 1, -1.0);
        a_entry(&mut a, n, 1, 1, 2, 1.0);
        a_entry(&mut a, n, 2, 1, 2, -1.0);
        a_entry(&mut a, n, 2, 2, 2, 2.0);
        let d = builtin::rational();
        let g = d.full_state_matrix().expect("rational dictionary contains x1");
        QuadraticModel::new(d, a, DMatrix::zeros(n, n), DVector::zeros(n), g, ModelMeta::default())
            .expect("consistent shapes")
    }
}
