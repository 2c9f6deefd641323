//! Best approximation in discrete and continuous inner-product spaces, and
//! the Monte Carlo convergence study of empirical Gram systems.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dictionary::Dictionary;
use crate::dynamics::{exact_derivatives, sample_uniform, VectorField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::{PinvPolicy, SymmetricPinv};
use crate::qendy::{assemble_gram, build_data_matrices};
use crate::quadmodel::kron;

/// Nodes and weights of the `order`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(Error::config("quadrature order must be at least 1"));
    }
    if order > 1000 {
        return Err(Error::config("quadrature order above 1000"));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-type initial guess for the i-th largest root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, PartialEq)]
pub enum InnerProductSpec {
    /// `⟨f, g⟩ = Σ f(xᵢ) g(xᵢ) μᵢ`; one point per row.
    Discrete {
        points: DMatrix<f64>,
        weights: Vec<f64>,
    },
    /// `⟨f, g⟩ = ∫ f g dμ` for the uniform measure on a box, by tensor
    /// Gauss–Legendre quadrature. `normalized` makes `μ` a probability
    /// measure.
    Continuous {
        domain: Vec<(f64, f64)>,
        normalized: bool,
        order: usize,
    },
}

pub const DEFAULT_QUADRATURE_ORDER: usize = 20;

impl InnerProductSpec {
    pub fn uniform(domain: Vec<(f64, f64)>, normalized: bool) -> Self {
        InnerProductSpec::Continuous {
            domain,
            normalized,
            order: DEFAULT_QUADRATURE_ORDER,
        }
    }

    pub fn with_order(self, order: usize) -> Self {
        match self {
            InnerProductSpec::Continuous { domain, normalized, .. } => InnerProductSpec::Continuous {
                domain,
                normalized,
                order,
            },
            other => other,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InnerProductSpec::Discrete { points, .. } => points.ncols(),
            InnerProductSpec::Continuous { domain, .. } => domain.len(),
        }
    }

    /// Evaluation points (rows) and their weights.
    pub fn nodes(&self) -> Result<(DMatrix<f64>, Vec<f64>)> {
        match self {
            InnerProductSpec::Discrete { points, weights } => {
                if points.nrows() != weights.len() {
                    return Err(Error::input(format!(
                        "{} points but {} weights",
                        points.nrows(),
                        weights.len()
                    )));
                }
                if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
                    return Err(Error::config("weights must be positive"));
                }
                Ok((points.clone(), weights.clone()))
            }
            InnerProductSpec::Continuous {
                domain,
                normalized,
                order,
            } => {
                if domain.is_empty() || domain.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
                    return Err(Error::config("domain must have finite lo < hi on every axis"));
                }
                let (x, w) = gauss_legendre(*order)?;
                let d = domain.len();
                let total = order.checked_pow(d as u32).filter(|t| *t <= 10_000_000).ok_or_else(|| {
                    Error::config("tensor quadrature grid too large")
                })?;
                let volume: f64 = domain.iter().map(|(lo, hi)| hi - lo).product();
                let mut points = DMatrix::zeros(total, d);
                let mut weights = vec![0.0; total];
                for (k, wk) in weights.iter_mut().enumerate() {
                    let mut rest = k;
                    let mut weight = 1.0;
                    for (axis, (lo, hi)) in domain.iter().enumerate() {
                        let idx = rest % order;
                        rest /= order;
                        let half = 0.5 * (hi - lo);
                        points[(k, axis)] = lo + half * (x[idx] + 1.0);
                        weight *= half * w[idx];
                    }
                    *wk = if *normalized { weight / volume } else { weight };
                }
                Ok((points, weights))
            }
        }
    }
}

/// Best approximation of `target` by the span of `basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct BestApproxProblem {
    pub basis: Vec<Expr>,
    pub target: Expr,
    pub space: InnerProductSpec,
}

impl BestApproxProblem {
    fn values(&self) -> Result<(DMatrix<f64>, DVector<f64>, Vec<f64>)> {
        if self.basis.is_empty() {
            return Err(Error::input("empty basis"));
        }
        let (points, weights) = self.space.nodes()?;
        let mut phi = DMatrix::zeros(self.basis.len(), points.nrows());
        let mut f = DVector::zeros(points.nrows());
        for k in 0..points.nrows() {
            let x: Vec<f64> = points.row(k).iter().copied().collect();
            for (i, e) in self.basis.iter().enumerate() {
                phi[(i, k)] = e.eval(&x).map_err(|err| Error::Sample {
                    index: k,
                    source: Box::new(err),
                })?;
            }
            f[k] = self.target.eval(&x)?;
        }
        Ok((phi, f, weights))
    }

    /// `a_ij = ⟨φ_i, φ_j⟩`, `b_i = ⟨φ_i, f⟩`.
    pub fn gram(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let (phi, f, w) = self.values()?;
        let weighted = weight_columns(&phi, &w);
        Ok((&weighted * phi.transpose(), weighted * f))
    }

    /// `E(α) = ‖f − Σ αᵢ φᵢ‖²`.
    pub fn error(&self, alpha: &DVector<f64>) -> Result<f64> {
        let (phi, f, w) = self.values()?;
        if alpha.len() != phi.nrows() {
            return Err(Error::input("coefficient vector has the wrong length"));
        }
        let r = f - phi.transpose() * alpha;
        Ok(r.iter().zip(&w).map(|(ri, wi)| ri * ri * wi).sum())
    }
}

fn weight_columns(m: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (mut col, wk) in out.column_iter_mut().zip(w) {
        col *= *wk;
    }
    out
}

/// `α = A⁺ b`.
pub fn solve_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    crate::linalg::min_norm_solve(a, b, PinvPolicy::default())
}

/// Infinite-data limit of the quadratic Gram system.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitGram {
    /// Inner products of the augmented basis, block order products,
    /// singletons, constant.
    pub r: DMatrix<f64>,
    /// Column `ℓ` holds `⟨ψ, ∇φ_ℓ · F⟩` for every augmented function `ψ`.
    pub s: DMatrix<f64>,
}

/// Basis values, derivative values, vector field values and weights at the
/// quadrature nodes.
type LimitValues = (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, Vec<f64>);

fn limit_values<F: VectorField + ?Sized>(
    d: &Dictionary,
    f: &F,
    space: &InnerProductSpec,
) -> Result<LimitValues> {
    if space.dim() != d.state_dim() || f.dim() != d.state_dim() {
        return Err(Error::input("dictionary, vector field and domain dimensions differ"));
    }
    let (points, weights) = space.nodes()?;
    let n = d.len();
    let p = n * n + n + 1;
    let q = points.nrows();
    let mut w = DMatrix::zeros(p, q);
    let mut zdot = DMatrix::zeros(n, q);
    let mut xdot = DMatrix::zeros(d.state_dim(), q);
    for k in 0..q {
        let x: Vec<f64> = points.row(k).iter().copied().collect();
        let fx = f.eval(&x)?;
        let (z, zd) = d.feature_map_with_derivative(&x, &fx).map_err(|e| Error::Sample {
            index: k,
            source: Box::new(e),
        })?;
        w.column_mut(k).rows_mut(0, n * n).copy_from_slice(&kron(&z));
        w.column_mut(k).rows_mut(n * n, n).copy_from_slice(&z);
        w[(p - 1, k)] = 1.0;
        zdot.column_mut(k).copy_from_slice(&zd);
        xdot.column_mut(k).copy_from_slice(&fx);
    }
    Ok((w, zdot, xdot, weights))
}

/// `R*` and `S*` from quadrature.
pub fn limit_gram<F: VectorField + ?Sized>(d: &Dictionary, f: &F, space: &InnerProductSpec) -> Result<LimitGram> {
    let (w, zdot, _, weights) = limit_values(d, f, space)?;
    let ww = weight_columns(&w, &weights);
    Ok(LimitGram {
        r: &ww * w.transpose(),
        s: ww * zdot.transpose(),
    })
}

/// `Ξ*` of the continuous best approximation of `F` in the span of the
/// dictionary.
pub fn limit_sindy<F: VectorField + ?Sized>(d: &Dictionary, f: &F, space: &InnerProductSpec) -> Result<DMatrix<f64>> {
    let (w, _, xdot, weights) = limit_values(d, f, space)?;
    let n = d.len();
    let phi = w.rows(n * n, n).into_owned();
    let wp = weight_columns(&phi, &weights);
    let gram = &wp * phi.transpose();
    let rhs = wp * xdot.transpose();
    Ok(SymmetricPinv::new(&gram, PinvPolicy::default())?
        .apply_matrix(&rhs)
        .transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMetric {
    /// Mean of `|empirical − limit|` over entries.
    #[default]
    MeanAbs,
    /// `Σ |empirical − limit| / Σ |limit|`.
    Relative,
}

impl ErrorMetric {
    fn apply<'a>(&self, emp: impl Iterator<Item = &'a f64>, lim: impl Iterator<Item = &'a f64>) -> f64 {
        let (mut diff, mut scale, mut count) = (0.0, 0.0, 0usize);
        for (e, l) in emp.zip(lim) {
            diff += (e - l).abs();
            scale += l.abs();
            count += 1;
        }
        match self {
            ErrorMetric::MeanAbs => diff / count.max(1) as f64,
            ErrorMetric::Relative if scale > 0.0 => diff / scale,
            ErrorMetric::Relative => diff,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub domain: Vec<(f64, f64)>,
    pub m_list: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub metric: ErrorMetric,
    pub quadrature_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub m: usize,
    pub run: usize,
    pub e_r: f64,
    pub e_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub m: usize,
    pub e_r_mean: f64,
    /// Mean over runs and rows `ℓ`.
    pub e_s_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub summary: Vec<StudySummary>,
    pub slope_r: f64,
    pub slope_s: f64,
}

/// Seed of run `run` at sample size `m`, independent of scheduling.
pub fn run_seed(seed: u64, m: usize, run: usize) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [m as u64, run as u64] {
        h = (h ^ v).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h
}

/// Compares `R/m` and `S/m` from uniform samples with their quadrature
/// limits under the normalised uniform measure.
pub fn convergence_study<F: VectorField + ?Sized>(d: &Dictionary, f: &F, cfg: &StudyConfig) -> Result<StudyResult> {
    if cfg.runs == 0 || cfg.m_list.is_empty() {
        return Err(Error::config("need at least one run and one sample size"));
    }
    if cfg.m_list.windows(2).any(|w| w[0] >= w[1]) || cfg.m_list[0] == 0 {
        return Err(Error::config("sample sizes must be positive and increasing"));
    }
    let space = InnerProductSpec::Continuous {
        domain: cfg.domain.clone(),
        normalized: true,
        order: cfg.quadrature_order,
    };
    let limit = limit_gram(d, f, &space)?;
    let jobs: Vec<(usize, usize)> = cfg
        .m_list
        .iter()
        .flat_map(|&m| (0..cfg.runs).map(move |r| (m, r)))
        .collect();
    let rows: Vec<StudyRow> = jobs
        .par_iter()
        .map(|&(m, run)| {
            let x = sample_uniform(&cfg.domain, m, run_seed(cfg.seed, m, run))?;
            let ts = exact_derivatives(f, &x)?;
            let gram = assemble_gram(&build_data_matrices(d, &ts)?, 0.0)?;
            let inv_m = 1.0 / m as f64;
            let r = gram.r * inv_m;
            let s = gram.s * inv_m;
            let e_r = cfg.metric.apply(r.iter(), limit.r.iter());
            let e_s = (0..s.ncols())
                .map(|l| cfg.metric.apply(s.column(l).iter(), limit.s.column(l).iter()))
                .collect();
            Ok(StudyRow { m, run, e_r, e_s })
        })
        .collect::<Result<_>>()?;
    let summary: Vec<StudySummary> = cfg
        .m_list
        .iter()
        .map(|&m| {
            let sel: Vec<&StudyRow> = rows.iter().filter(|r| r.m == m).collect();
            let k = sel.len() as f64;
            StudySummary {
                m,
                e_r_mean: sel.iter().map(|r| r.e_r).sum::<f64>() / k,
                e_s_mean: sel
                    .iter()
                    .map(|r| r.e_s.iter().sum::<f64>() / r.e_s.len() as f64)
                    .sum::<f64>()
                    / k,
            }
        })
        .collect();
    let ms: Vec<f64> = summary.iter().map(|s| s.m as f64).collect();
    let slope_r = loglog_slope(&ms, &summary.iter().map(|s| s.e_r_mean).collect::<Vec<_>>());
    let slope_s = loglog_slope(&ms, &summary.iter().map(|s| s.e_s_mean).collect::<Vec<_>>());
    Ok(StudyResult {
        rows,
        summary,
        slope_r,
        slope_s,
    })
}

/// Least-squares slope of `log y` against `log x`; NaN with fewer than two
/// points.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).map(|(a, b)| (a.ln(), b.ln())).collect();
    let k = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::builtin;
    use crate::dynamics::systems;
    use crate::expr::parse;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for order in [1, 2, 5, 20] {
            let (x, w) = gauss_legendre(order).unwrap();
            for deg in 0..(2 * order) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!(close(q, exact, 1e-13), "order {order} deg {deg}: {q}");
            }
        }
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn discrete_gram_by_hand() {
        let p = BestApproxProblem {
            basis: vec![parse("1").unwrap(), parse("x1").unwrap()],
            target: parse("x1").unwrap(),
            space: InnerProductSpec::Discrete {
                points: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
                weights: vec![1.0, 1.0],
            },
        };
        let (a, b) = p.gram().unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]));
        assert_eq!(b.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn continuous_gram_by_hand() {
        let p = BestApproxProblem {
            basis: vec![parse("1").unwrap(), parse("x1").unwrap()],
            target: parse("x1").unwrap(),
            space: InnerProductSpec::uniform(vec![(-1.0, 1.0)], false),
        };
        let (a, _) = p.gram().unwrap();
        assert!(close(a[(0, 0)], 2.0, 1e-14) && close(a[(1, 1)], 2.0 / 3.0, 1e-14));
        assert!(a[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn duplicated_basis_splits_evenly() {
        let p = BestApproxProblem {
            basis: vec![parse("x1").unwrap(), parse("x1").unwrap()],
            target: parse("x1").unwrap(),
            space: InnerProductSpec::uniform(vec![(-1.0, 1.0)], false),
        };
        let (a, b) = p.gram().unwrap();
        assert_eq!(SymmetricPinv::new(&a, PinvPolicy::default()).unwrap().rank(), 1);
        let alpha = solve_min_norm(&a, &b).unwrap();
        assert!(close(alpha[0], 0.5, 1e-14) && close(alpha[1], 0.5, 1e-14));
    }

    #[test]
    fn limit_gram_scalar_moments() {
        let d = Dictionary::parse(1, &["x1"]).unwrap();
        let lg = limit_gram(&d, &systems::zero(1), &InnerProductSpec::uniform(vec![(-1.0, 1.0)], true)).unwrap();
        let want = DMatrix::from_row_slice(3, 3, &[0.2, 0.0, 1.0 / 3.0, 0.0, 1.0 / 3.0, 0.0, 1.0 / 3.0, 0.0, 1.0]);
        assert!((lg.r - want).amax() < 1e-14);
    }

    #[test]
    fn limit_gram_constant_dictionary() {
        let d = Dictionary::parse(1, &["1"]).unwrap();
        let lg = limit_gram(&d, &systems::zero(1), &InnerProductSpec::uniform(vec![(-1.0, 1.0)], true)).unwrap();
        assert!((lg.r - DMatrix::from_element(3, 3, 1.0)).amax() < 1e-14);
    }

    #[test]
    fn quadrature_order_converged() {
        let space = InnerProductSpec::uniform(vec![(-1.0, 1.0); 2], true);
        let d = builtin::pendulum();
        let f = systems::pendulum(0.1);
        let a = limit_gram(&d, &f, &space).unwrap();
        let b = limit_gram(&d, &f, &space.clone().with_order(40)).unwrap();
        assert!((a.r - b.r).amax() < 1e-12);
        assert!((a.s - b.s).amax() < 1e-12);
    }

    #[test]
    fn study_is_deterministic_and_decays() {
        let cfg = StudyConfig {
            domain: vec![(-1.0, 1.0); 2],
            m_list: vec![100, 10_000],
            runs: 4,
            seed: 3,
            metric: ErrorMetric::MeanAbs,
            quadrature_order: 20,
        };
        let d = builtin::pendulum();
        let f = systems::pendulum(0.1);
        let a = convergence_study(&d, &f, &cfg).unwrap();
        let b = convergence_study(&d, &f, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.summary[1].e_r_mean < a.summary[0].e_r_mean);
        assert_eq!(a.rows.len(), 8);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 10.0, 100.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!(close(loglog_slope(&x, &y), -0.5, 1e-12));
    }
}
