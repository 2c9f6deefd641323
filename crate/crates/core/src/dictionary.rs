//! Dictionaries of basis functions and the quadratically augmented basis.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};

/// Tolerance for validating a user-supplied full-state matrix.
pub const FULL_STATE_TOLERANCE: f64 = 1e-10;
const FULL_STATE_CHECKS: usize = 100;

/// Ordered feature map `φ = [φ_1, …, φ_N]` over an `n`-dimensional state.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    state_dim: usize,
    basis: Vec<Expr>,
    names: Vec<String>,
    full_state: Option<DMatrix<f64>>,
}

impl Dictionary {
    pub fn new(state_dim: usize, basis: Vec<Expr>) -> Result<Self> {
        let names = basis.iter().map(Expr::to_string).collect();
        Self::with_names(state_dim, basis, names)
    }

    pub fn with_names(state_dim: usize, basis: Vec<Expr>, names: Vec<String>) -> Result<Self> {
        if state_dim == 0 {
            return Err(Error::config("state dimension must be at least 1"));
        }
        if basis.is_empty() {
            return Err(Error::config("dictionary needs at least one basis function"));
        }
        if names.len() != basis.len() {
            return Err(Error::config("one name per basis function"));
        }
        for (i, e) in basis.iter().enumerate() {
            if e.arity() > state_dim {
                return Err(Error::Basis {
                    index: i,
                    name: names[i].clone(),
                    source: Box::new(Error::VariableOutOfRange {
                        index: e.arity() - 1,
                        dim: state_dim,
                    }),
                });
            }
        }
        Ok(Dictionary {
            state_dim,
            basis,
            names,
            full_state: None,
        })
    }

    /// Builds a dictionary from grammar strings; the strings become the names.
    pub fn parse(state_dim: usize, basis: &[&str]) -> Result<Self> {
        let exprs = basis
            .iter()
            .map(|s| parse(s))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let names = basis.iter().map(|s| s.to_string()).collect();
        Self::with_names(state_dim, exprs, names)
    }

    /// Attaches an explicit projection `G` after checking `G φ(x) = x` on
    /// random points of `domain`.
    pub fn with_full_state_matrix(
        mut self,
        g: DMatrix<f64>,
        domain: &[(f64, f64)],
        seed: u64,
    ) -> Result<Self> {
        if g.nrows() != self.state_dim || g.ncols() != self.len() {
            return Err(Error::config(format!(
                "G must be {}x{}, got {}x{}",
                self.state_dim,
                self.len(),
                g.nrows(),
                g.ncols()
            )));
        }
        if domain.len() != self.state_dim || domain.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::config("validation domain must give lo < hi per axis"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..FULL_STATE_CHECKS {
            let x: Vec<f64> = domain
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..hi))
                .collect();
            let z = DVector::from_vec(self.feature_map(&x)?);
            let err = (&g * z - DVector::from_column_slice(&x)).norm();
            if !(err < FULL_STATE_TOLERANCE) {
                return Err(Error::config(format!(
                    "G does not reproduce the state: |G phi(x) - x| = {err:e} at {x:?}"
                )));
            }
        }
        self.full_state = Some(g);
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Number of basis functions `N`.
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[Expr] {
        &self.basis
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn explicit_full_state(&self) -> Option<&DMatrix<f64>> {
        self.full_state.as_ref()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.state_dim {
            return Err(Error::input(format!(
                "state has length {}, dictionary expects {}",
                x.len(),
                self.state_dim
            )));
        }
        Ok(())
    }

    fn wrap(&self, i: usize, e: Error) -> Error {
        Error::Basis {
            index: i,
            name: self.names[i].clone(),
            source: Box::new(e),
        }
    }

    /// `z = φ(x)`.
    pub fn feature_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        self.basis
            .iter()
            .enumerate()
            .map(|(i, e)| e.eval(x).map_err(|err| self.wrap(i, err)))
            .collect()
    }

    /// `J(x)`, one gradient per row.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let mut j = DMatrix::zeros(self.len(), self.state_dim);
        for (i, e) in self.basis.iter().enumerate() {
            let g = e.grad(x).map_err(|err| self.wrap(i, err))?;
            for (c, v) in g.into_iter().enumerate() {
                j[(i, c)] = v;
            }
        }
        Ok(j)
    }

    /// `(φ(x), J(x) v)` with one dual pass per basis function.
    pub fn feature_map_with_derivative(&self, x: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_point(x)?;
        let mut z = Vec::with_capacity(self.len());
        let mut zdot = Vec::with_capacity(self.len());
        for (i, e) in self.basis.iter().enumerate() {
            let (val, d) = e.eval_directional(x, v).map_err(|err| self.wrap(i, err))?;
            z.push(val);
            zdot.push(d);
        }
        Ok((z, zdot))
    }

    /// The projection `G` with `x = G φ(x)`.
    ///
    /// Uses the explicit matrix when one was attached; otherwise row `j` picks
    /// the first basis entry that is exactly `Var(j)`.
    pub fn full_state_matrix(&self) -> Result<DMatrix<f64>> {
        if let Some(g) = &self.full_state {
            return Ok(g.clone());
        }
        let mut g = DMatrix::zeros(self.state_dim, self.len());
        for j in 0..self.state_dim {
            let pos = self
                .basis
                .iter()
                .position(|e| *e == Expr::Var(j))
                .ok_or_else(|| {
                    Error::config(format!(
                        "coordinate x{} is not a basis function and no G was supplied",
                        j + 1
                    ))
                })?;
            g[(j, pos)] = 1.0;
        }
        Ok(g)
    }

    pub fn augment(&self) -> AugmentedBasis {
        AugmentedBasis { source: self.clone() }
    }
}

/// `{φ_i φ_j} ∪ {φ_i} ∪ {1}` of size `N² + N + 1`.
///
/// The product block comes first in row-major pair order, so pair `(i, j)`
/// (0-based) sits at index `N·i + j`. The singletons follow and the
/// constant is last. This is the same block order as the Gram system.
#[derive(Debug, Clone)]
pub struct AugmentedBasis {
    source: Dictionary,
}

impl AugmentedBasis {
    pub fn source(&self) -> &Dictionary {
        &self.source
    }

    pub fn len(&self) -> usize {
        let n = self.source.len();
        n * n + n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn product_index(&self, i: usize, j: usize) -> usize {
        self.source.len() * i + j
    }

    pub fn feature_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.source.feature_map(x)?;
        Ok(augment_values(&z))
    }

    /// The augmented basis as a plain dictionary over the same state.
    pub fn to_dictionary(&self) -> Dictionary {
        let src = &self.source;
        let n = src.len();
        let mut basis = Vec::with_capacity(self.len());
        let mut names = Vec::with_capacity(self.len());
        for i in 0..n {
            for j in 0..n {
                basis.push(Expr::mul(src.basis[i].clone(), src.basis[j].clone()));
                names.push(format!("({})*({})", src.names[i], src.names[j]));
            }
        }
        basis.extend(src.basis.iter().cloned());
        names.extend(src.names.iter().cloned());
        basis.push(Expr::Const(1.0));
        names.push("1".to_string());
        Dictionary {
            state_dim: src.state_dim,
            basis,
            names,
            full_state: None,
        }
    }
}

/// `[z⊗z; z; 1]`.
pub fn augment_values(z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut out = Vec::with_capacity(n * n + n + 1);
    for &a in z {
        for &b in z {
            out.push(a * b);
        }
    }
    out.extend_from_slice(z);
    out.push(1.0);
    out
}

/// Dictionaries used by the benchmark systems.
pub mod builtin {
    use super::*;

    /// `[x1, x2, sin x1, cos x1]`.
    pub fn pendulum() -> Dictionary {
        Dictionary::parse(2, &["x1", "x2", "sin(x1)", "cos(x1)"]).expect("static dictionary")
    }

    /// `[x, 1/(1+x), x/(1+x)^2]`.
    pub fn rational() -> Dictionary {
        Dictionary::parse(1, &["x1", "1/(1+x1)", "x1/(1+x1)^2"]).expect("static dictionary")
    }

    /// States, sines and cosines of a 3-d state.
    pub fn thomas() -> Dictionary {
        Dictionary::parse(
            3,
            &[
                "x1", "x2", "x3", "sin(x1)", "sin(x2)", "sin(x3)", "cos(x1)", "cos(x2)", "cos(x3)",
            ],
        )
        .expect("static dictionary")
    }

    /// [`thomas`] extended by the cyclic products `x_{i+1} sin x_i` and
    /// `x_{i+1} cos x_i`, which closes the modified Thomas system.
    pub fn thomas_extended() -> Dictionary {
        Dictionary::parse(
            3,
            &[
                "x1",
                "x2",
                "x3",
                "sin(x1)",
                "sin(x2)",
                "sin(x3)",
                "cos(x1)",
                "cos(x2)",
                "cos(x3)",
                "x2*sin(x1)",
                "x3*sin(x2)",
                "x1*sin(x3)",
                "x2*cos(x1)",
                "x3*cos(x2)",
                "x1*cos(x3)",
            ],
        )
        .expect("static dictionary")
    }

    /// `[x1, x2, x2^4]`.
    pub fn linear_lift() -> Dictionary {
        Dictionary::parse(2, &["x1", "x2", "x2^4"]).expect("static dictionary")
    }

    /// `[x1, x2, x2^2]`.
    pub fn quadratic_lift() -> Dictionary {
        Dictionary::parse(2, &["x1", "x2", "x2^2"]).expect("static dictionary")
    }

    /// `z = x`.
    pub fn identity(n: usize) -> Dictionary {
        Dictionary::new(n, (0..n).map(Expr::Var).collect()).expect("n >= 1")
    }

    pub fn by_name(name: &str) -> Option<Dictionary> {
        Some(match name {
            "pendulum" => pendulum(),
            "rational" => rational(),
            "thomas" => thomas(),
            "thomas-extended" => thomas_extended(),
            "linear-lift" => linear_lift(),
            "quadratic-lift" => quadratic_lift(),
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::builtin::*;
    use super::*;

    #[test]
    fn feature_map_examples() {
        assert_eq!(pendulum().feature_map(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(rational().feature_map(&[1.0]).unwrap(), vec![1.0, 0.5, 0.25]);
        assert_eq!(
            thomas().feature_map(&[0.0, 0.0, 0.0]).unwrap(),
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]
        );
    }

    #[test]
    fn feature_map_reports_basis_index() {
        match rational().feature_map(&[-1.0]) {
            Err(Error::Basis { index: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(pendulum().feature_map(&[0.0]).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let x = [0.7, -0.2];
        let j = pendulum().jacobian(&x).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            2,
            &[1.0, 0.0, 0.0, 1.0, x[0].cos(), 0.0, -x[0].sin(), 0.0],
        );
        assert!((j - expected).abs().max() < 1e-15);

        let single = Dictionary::parse(1, &["x1"]).unwrap();
        assert_eq!(single.jacobian(&[4.0]).unwrap(), DMatrix::from_element(1, 1, 1.0));

        let j = rational().jacobian(&[0.0]).unwrap();
        assert_eq!(j.as_slice(), &[1.0, -1.0, 1.0]);
    }

    #[test]
    fn augment_sizes_and_order() {
        let d = Dictionary::parse(1, &["x1"]).unwrap();
        let aug = d.augment();
        assert_eq!(aug.len(), 3);
        assert_eq!(aug.feature_map(&[3.0]).unwrap(), vec![9.0, 3.0, 1.0]);

        let d2 = Dictionary::parse(1, &["x1", "exp(x1)"]).unwrap();
        let aug2 = d2.augment();
        assert_eq!(aug2.len(), 7);
        let v = aug2.feature_map(&[0.5]).unwrap();
        let e = 0.5f64.exp();
        assert_eq!(&v[..4], &[0.25, 0.5 * e, e * 0.5, e * e]);

        let p = pendulum().augment();
        assert_eq!(p.len(), 21);
        // pair (2,4) in 1-based numbering
        let idx = p.product_index(1, 3);
        assert_eq!(p.feature_map(&[0.0, 1.0]).unwrap()[idx], 1.0);
        assert_eq!(*p.feature_map(&[0.3, 0.1]).unwrap().last().unwrap(), 1.0);
    }

    #[test]
    fn augmented_dictionary_matches_values() {
        let d = pendulum();
        let aug = d.augment();
        let as_dict = aug.to_dictionary();
        let x = [0.4, -0.9];
        let a = aug.feature_map(&x).unwrap();
        let b = as_dict.feature_map(&x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn full_state_examples() {
        let g = pendulum().full_state_matrix().unwrap();
        assert_eq!(
            g,
            DMatrix::from_row_slice(2, 4, &[1., 0., 0., 0., 0., 1., 0., 0.])
        );
        let g = rational().full_state_matrix().unwrap();
        assert_eq!(g, DMatrix::from_row_slice(1, 3, &[1., 0., 0.]));
        let err = Dictionary::parse(1, &["sin(x1)"]).unwrap().full_state_matrix();
        match err {
            Err(Error::Config(msg)) => assert!(msg.contains("x1")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn explicit_full_state_is_validated() {
        // x1 = 2 * (x1/2)
        let d = Dictionary::parse(1, &["0.5*x1", "sin(x1)"]).unwrap();
        let ok = d
            .clone()
            .with_full_state_matrix(DMatrix::from_row_slice(1, 2, &[2.0, 0.0]), &[(-1.0, 1.0)], 0)
            .unwrap();
        assert_eq!(ok.full_state_matrix().unwrap()[(0, 0)], 2.0);
        assert!(d
            .with_full_state_matrix(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), &[(-1.0, 1.0)], 0)
            .is_err());
    }

    #[test]
    fn rejects_out_of_range_variables() {
        assert!(Dictionary::parse(1, &["x2"]).is_err());
        assert!(Dictionary::parse(1, &[]).is_err());
    }
}
