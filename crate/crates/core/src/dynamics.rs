//! Vector fields, fixed-step RK4, sampling and derivative estimation.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};

/// Autonomous right-hand side `ẋ = F(x)`.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl<T: VectorField + ?Sized> VectorField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        (**self).eval(x)
    }
}

/// A vector field given component-wise by expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprField {
    components: Vec<Expr>,
}

impl ExprField {
    pub fn new(components: Vec<Expr>) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(Error::config("vector field needs at least one component"));
        }
        if let Some(e) = components.iter().find(|e| e.arity() > n) {
            return Err(Error::VariableOutOfRange {
                index: e.arity() - 1,
                dim: n,
            });
        }
        Ok(ExprField { components })
    }

    pub fn parse(components: &[&str]) -> Result<Self> {
        let exprs = components
            .iter()
            .map(|s| parse(s))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(exprs)
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }
}

impl VectorField for ExprField {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::input(format!(
                "state has length {}, vector field expects {}",
                x.len(),
                self.dim()
            )));
        }
        self.components.iter().map(|e| e.eval(x)).collect()
    }
}

/// Wraps a closure as a vector field.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.f)(x))
    }
}

/// Benchmark systems.
pub mod systems {
    use super::*;

    fn field(components: &[String]) -> ExprField {
        let refs: Vec<&str> = components.iter().map(String::as_str).collect();
        ExprField::parse(&refs).expect("benchmark right-hand sides are well formed")
    }

    /// `ẋ = −x / (1 + x)`.
    pub fn rational() -> ExprField {
        ExprField::parse(&["-x1/(1+x1)"]).expect("static")
    }

    /// Damped pendulum `ẋ1 = x2`, `ẋ2 = −sin x1 − c x2`.
    pub fn pendulum(damping: f64) -> ExprField {
        field(&["x2".into(), format!("-sin(x1) - {damping:?}*x2")])
    }

    /// `ẋ1 = x1 − x2⁴`, `ẋ2 = 2 x2`; linear in `[x1, x2, x2⁴]`.
    pub fn linear_lift() -> ExprField {
        ExprField::parse(&["x1 - x2^4", "2*x2"]).expect("static")
    }

    /// `ẋ1 = x1 − x2⁴`, `ẋ2 = x1 + 2 x2`; quadratic in `[x1, x2, x2²]`.
    pub fn quadratic_lift() -> ExprField {
        ExprField::parse(&["x1 - x2^4", "x1 + 2*x2"]).expect("static")
    }

    /// Modified Thomas system; `beta = 0` is the classical cyclically
    /// symmetric attractor.
    pub fn thomas(alpha: f64, beta: f64) -> ExprField {
        let comp = |a: usize, b: usize| {
            format!("sin(x{b}) - {alpha:?}*x{a} - {beta:?}*x{b}*cos(x{a})")
        };
        field(&[comp(1, 2), comp(2, 3), comp(3, 1)])
    }

    /// Mean-field model of cylinder wake vortex shedding: a slow paraboloid
    /// manifold `x3 = x1² + x2²` carrying a stable limit cycle of radius
    /// `sqrt(-mu/a)`. Exactly quadratic.
    pub fn mean_field(mu: f64, omega: f64, a: f64, lambda: f64) -> ExprField {
        field(&[
            format!("{mu:?}*x1 - {omega:?}*x2 + {a:?}*x1*x3"),
            format!("{omega:?}*x1 + {mu:?}*x2 + {a:?}*x2*x3"),
            format!("-{lambda:?}*(x3 - x1^2 - x2^2)"),
        ])
    }

    /// Harmonic rotation `ẋ1 = x2`, `ẋ2 = −x1`.
    pub fn rotation() -> ExprField {
        ExprField::parse(&["x2", "-x1"]).expect("static")
    }

    pub fn zero(n: usize) -> ExprField {
        ExprField::new(vec![Expr::Const(0.0); n.max(1)]).expect("n >= 1")
    }
}

/// Where the time derivatives of a training set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    FiniteDifference,
    External,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Exact => "exact",
            Provenance::FiniteDifference => "finite-difference",
            Provenance::External => "external",
        })
    }
}

/// Uniformly sampled solution; row `k` of `states` is the state at `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: DMatrix<f64>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: DMatrix<f64>) -> Result<Self> {
        if times.len() != states.nrows() {
            return Err(Error::input(format!(
                "{} times but {} states",
                times.len(),
                states.nrows()
            )));
        }
        if times.is_empty() {
            return Err(Error::input("empty trajectory"));
        }
        if states.iter().chain(&times).any(|v| !v.is_finite()) {
            return Err(Error::input("trajectory contains non-finite values"));
        }
        if times.len() >= 2 {
            let dt = times[1] - times[0];
            if !(dt > 0.0) {
                return Err(Error::input("times must be strictly increasing"));
            }
            for (k, w) in times.windows(2).enumerate() {
                let step = w[1] - w[0];
                if (step - dt).abs() > 1e-10 * w[1].abs().max(dt) {
                    return Err(Error::input(format!("non-uniform time step at row {}", k + 1)));
                }
            }
        }
        Ok(Trajectory { times, states })
    }

    fn new_unchecked(times: Vec<f64>, states: DMatrix<f64>) -> Self {
        Trajectory { times, states }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    /// Sampling interval (0 for a single sample).
    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn state(&self, k: usize) -> Vec<f64> {
        self.states.row(k).iter().copied().collect()
    }

    pub fn last_state(&self) -> Vec<f64> {
        self.state(self.len() - 1)
    }

    /// Every `stride`-th sample, starting with the first.
    pub fn subsample(&self, stride: usize) -> Trajectory {
        let stride = stride.max(1);
        let rows: Vec<usize> = (0..self.len()).step_by(stride).collect();
        let times = rows.iter().map(|&k| self.times[k]).collect();
        let states = self.states.select_rows(rows.iter());
        Trajectory::new_unchecked(times, states)
    }

    /// Rows `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Trajectory> {
        if start >= end || end > self.len() {
            return Err(Error::input(format!("invalid slice {start}..{end}")));
        }
        Ok(Trajectory::new_unchecked(
            self.times[start..end].to_vec(),
            self.states.rows(start, end - start).into_owned(),
        ))
    }
}

/// Paired states and time derivatives, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    states: DMatrix<f64>,
    derivatives: DMatrix<f64>,
    provenance: Provenance,
}

impl TrainingSet {
    pub fn new(states: DMatrix<f64>, derivatives: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        if states.shape() != derivatives.shape() {
            return Err(Error::input(format!(
                "states are {:?} but derivatives are {:?}",
                states.shape(),
                derivatives.shape()
            )));
        }
        if states.nrows() == 0 || states.ncols() == 0 {
            return Err(Error::input("training set is empty"));
        }
        if states.iter().chain(derivatives.iter()).any(|v| !v.is_finite()) {
            return Err(Error::input("training set contains non-finite values"));
        }
        Ok(TrainingSet {
            states,
            derivatives,
            provenance,
        })
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn derivatives(&self) -> &DMatrix<f64> {
        &self.derivatives
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn state(&self, k: usize) -> Vec<f64> {
        self.states.row(k).iter().copied().collect()
    }

    pub fn derivative(&self, k: usize) -> Vec<f64> {
        self.derivatives.row(k).iter().copied().collect()
    }

    /// The first `m` samples.
    pub fn head(&self, m: usize) -> Result<TrainingSet> {
        if m == 0 || m > self.len() {
            return Err(Error::input(format!("cannot take {m} of {} samples", self.len())));
        }
        Ok(TrainingSet {
            states: self.states.rows(0, m).into_owned(),
            derivatives: self.derivatives.rows(0, m).into_owned(),
            provenance: self.provenance,
        })
    }
}

fn axpy(y: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(y, k)| y + a * k).collect()
}

fn rk4_step<F: VectorField + ?Sized>(f: &F, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let k1 = f.eval(x)?;
    let k2 = f.eval(&axpy(x, 0.5 * h, &k1))?;
    let k3 = f.eval(&axpy(x, 0.5 * h, &k2))?;
    let k4 = f.eval(&axpy(x, h, &k3))?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Result of an integration that may have stopped early.
#[derive(Debug, Clone)]
pub struct Integration {
    pub trajectory: Trajectory,
    /// Step at which a non-finite state appeared; the trajectory holds the
    /// samples before it.
    pub blowup: Option<usize>,
}

fn check_step(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::config("time step must be positive"));
    }
    if !(t_end >= dt) || !t_end.is_finite() {
        return Err(Error::config("end time must be at least one step"));
    }
    let steps = (t_end / dt).round();
    if steps > 1e8 {
        return Err(Error::config("too many integration steps"));
    }
    Ok(steps as usize)
}

/// Classical fixed-step RK4 with `round(t_end/dt)` steps, keeping every
/// `stride`-th state. A non-finite state stops the integration without error.
pub fn rk4_integrate_partial<F: VectorField + ?Sized>(
    f: &F,
    x0: &[f64],
    steps: usize,
    dt: f64,
    stride: usize,
) -> Result<Integration> {
    let n = f.dim();
    if x0.len() != n {
        return Err(Error::input(format!(
            "initial state has length {}, system dimension is {n}",
            x0.len()
        )));
    }
    let stride = stride.max(1);
    let mut times = vec![0.0];
    let mut data: Vec<f64> = x0.to_vec();
    let mut x = x0.to_vec();
    let mut blowup = None;
    for step in 1..=steps {
        let next = match rk4_step(f, &x, dt) {
            Ok(v) => v,
            Err(Error::Domain { .. }) => {
                blowup = Some(step);
                break;
            }
            Err(e) => return Err(e),
        };
        if next.iter().any(|v| !v.is_finite()) {
            blowup = Some(step);
            break;
        }
        x = next;
        if step % stride == 0 {
            times.push(step as f64 * dt);
            data.extend_from_slice(&x);
        }
    }
    let states = DMatrix::from_row_slice(times.len(), n, &data);
    Ok(Integration {
        trajectory: Trajectory::new_unchecked(times, states),
        blowup,
    })
}

/// Integrates `ẋ = f(x)` from `x0` with fixed step `dt` up to `t_end`; the
/// trajectory includes the initial state.
pub fn rk4_integrate<F: VectorField + ?Sized>(
    f: &F,
    x0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let steps = check_step(dt, t_end)?;
    let out = rk4_integrate_partial(f, x0, steps, dt, 1)?;
    match out.blowup {
        Some(step) => Err(Error::Blowup {
            step,
            time: step as f64 * dt,
        }),
        None => Ok(out.trajectory),
    }
}

/// `samples` equally spaced states on `[0, t_end]` (both ends included),
/// integrated with the largest step not exceeding `max_step` that divides
/// the sampling interval.
pub fn integrate_sampled<F: VectorField + ?Sized>(
    f: &F,
    x0: &[f64],
    t_end: f64,
    samples: usize,
    max_step: f64,
) -> Result<Trajectory> {
    if samples < 2 {
        return Err(Error::config("need at least two samples"));
    }
    if !(max_step > 0.0) || !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::config("end time and step must be positive"));
    }
    let interval = t_end / (samples - 1) as f64;
    let sub = (interval / max_step).ceil().max(1.0);
    if sub * (samples as f64) > 1e8 {
        return Err(Error::config("too many integration steps"));
    }
    let sub = sub as usize;
    let h = interval / sub as f64;
    let out = rk4_integrate_partial(f, x0, sub * (samples - 1), h, sub)?;
    if let Some(step) = out.blowup {
        return Err(Error::Blowup {
            step,
            time: step as f64 * h,
        });
    }
    // exact sample times, free of accumulated rounding
    let times = (0..samples).map(|k| k as f64 * interval).collect();
    Trajectory::new(times, out.trajectory.states)
}

/// `m` points drawn uniformly from the box, reproducible for a fixed seed.
pub fn sample_uniform(bounds: &[(f64, f64)], m: usize, seed: u64) -> Result<DMatrix<f64>> {
    if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::config("sampling box must have finite lo < hi on every axis"));
    }
    if m == 0 {
        return Err(Error::config("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = bounds.len();
    let mut out = DMatrix::zeros(m, n);
    for k in 0..m {
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            out[(k, j)] = rng.random_range(lo..hi);
        }
    }
    Ok(out)
}

/// `ẋ⁽ᵏ⁾ = F(x⁽ᵏ⁾)` for every row.
pub fn exact_derivatives<F: VectorField + ?Sized>(f: &F, states: &DMatrix<f64>) -> Result<TrainingSet> {
    if states.ncols() != f.dim() {
        return Err(Error::input(format!(
            "states have {} columns, system dimension is {}",
            states.ncols(),
            f.dim()
        )));
    }
    let mut d = DMatrix::zeros(states.nrows(), states.ncols());
    for k in 0..states.nrows() {
        let x: Vec<f64> = states.row(k).iter().copied().collect();
        let v = f.eval(&x).map_err(|e| Error::Sample {
            index: k,
            source: Box::new(e),
        })?;
        for (j, vj) in v.into_iter().enumerate() {
            d[(k, j)] = vj;
        }
    }
    TrainingSet::new(states.clone(), d, Provenance::Exact)
}

/// Forward difference at the first sample, backward at the last, central
/// differences in between.
pub fn finite_diff_derivatives(traj: &Trajectory) -> Result<TrainingSet> {
    let m = traj.len();
    if m < 3 {
        return Err(Error::input(format!(
            "finite differences need at least 3 samples, got {m}"
        )));
    }
    let dt = traj.dt();
    let x = traj.states();
    let mut d = DMatrix::zeros(m, x.ncols());
    d.row_mut(0).copy_from(&((x.row(1) - x.row(0)) / dt));
    d.row_mut(m - 1).copy_from(&((x.row(m - 1) - x.row(m - 2)) / dt));
    for k in 1..m - 1 {
        d.row_mut(k).copy_from(&((x.row(k + 1) - x.row(k - 1)) / (2.0 * dt)));
    }
    TrainingSet::new(x.clone(), d, Provenance::FiniteDifference)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_exponential_decay() {
        let f = ExprField::parse(&["-x1"]).unwrap();
        let traj = rk4_integrate(&f, &[1.0], 1.0, 1e-3).unwrap();
        assert_eq!(traj.len(), 1001);
        assert_eq!(traj.state(0), vec![1.0]);
        let err = (traj.last_state()[0] - (-1.0f64).exp()).abs();
        assert!(err < 1e-10, "err = {err:e}");
    }

    #[test]
    fn rk4_fourth_order() {
        let f = ExprField::parse(&["-x1"]).unwrap();
        let e = |dt: f64| {
            let t = rk4_integrate(&f, &[1.0], 1.0, dt).unwrap();
            (t.last_state()[0] - (-1.0f64).exp()).abs()
        };
        let ratio = e(0.1) / e(0.05);
        assert!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rk4_constant_field() {
        let traj = rk4_integrate(&systems::zero(2), &[2.0, 3.0], 1.0, 0.1).unwrap();
        for k in 0..traj.len() {
            assert_eq!(traj.state(k), vec![2.0, 3.0]);
        }
    }

    #[test]
    fn damped_pendulum_dissipates() {
        let traj = rk4_integrate(&systems::pendulum(0.1), &[1.0, 0.0], 10.0, 1e-2).unwrap();
        let energy = |k: usize| {
            let x = traj.state(k);
            0.5 * x[1] * x[1] + (1.0 - x[0].cos())
        };
        for k in 1..traj.len() {
            assert!(energy(k) <= energy(k - 1) + 1e-12, "energy increased at {k}");
        }
    }

    #[test]
    fn blowup_is_reported() {
        let f = ExprField::parse(&["x1^2"]).unwrap();
        match rk4_integrate(&f, &[1.0], 5.0, 0.01) {
            Err(Error::Blowup { step, .. }) => assert!(step > 90),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_steps() {
        let f = systems::zero(1);
        assert!(rk4_integrate(&f, &[0.0], 1.0, 0.0).is_err());
        assert!(rk4_integrate(&f, &[0.0], 0.01, 0.1).is_err());
        assert!(rk4_integrate(&f, &[0.0, 1.0], 1.0, 0.1).is_err());
    }

    #[test]
    fn sampled_integration_hits_grid() {
        let f = ExprField::parse(&["-x1"]).unwrap();
        let t = integrate_sampled(&f, &[1.0], 5.0, 11, 0.01).unwrap();
        assert_eq!(t.len(), 11);
        assert_eq!(t.times()[10], 5.0);
        assert!((t.state(4)[0] - (-2.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn uniform_sampling() {
        let bounds = [(-1.0, 1.0), (-1.0, 1.0)];
        let a = sample_uniform(&bounds, 1000, 0).unwrap();
        let b = sample_uniform(&bounds, 1000, 0).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| (-1.0..1.0).contains(v)));
        let tol = 4.0 * 2.0 / (12.0f64 * 1000.0).sqrt();
        for j in 0..2 {
            let mean = a.column(j).mean();
            assert!(mean.abs() < tol, "mean {mean}");
        }
        assert_ne!(a, sample_uniform(&bounds, 1000, 1).unwrap());
        assert!(sample_uniform(&[(1.0, 1.0)], 3, 0).is_err());
    }

    #[test]
    fn exact_derivative_examples() {
        let ts = exact_derivatives(&systems::rational(), &DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(ts.derivative(0), vec![-0.5]);
        assert_eq!(ts.provenance(), Provenance::Exact);

        let ts = exact_derivatives(&systems::zero(2), &DMatrix::from_element(3, 2, 1.5)).unwrap();
        assert!(ts.derivatives().iter().all(|&v| v == 0.0));

        let x = DMatrix::from_row_slice(1, 2, &[std::f64::consts::FRAC_PI_2, 0.0]);
        let ts = exact_derivatives(&systems::pendulum(0.1), &x).unwrap();
        assert_eq!(ts.derivative(0), vec![0.0, -1.0]);
    }

    #[test]
    fn exact_derivative_domain_error_names_sample() {
        let x = DMatrix::from_column_slice(2, 1, &[0.0, -1.0]);
        match exact_derivatives(&systems::rational(), &x) {
            Err(Error::Sample { index: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    fn grid_traj(f: impl Fn(f64) -> f64, dt: f64, m: usize) -> Trajectory {
        let times: Vec<f64> = (0..m).map(|k| k as f64 * dt).collect();
        let states = DMatrix::from_iterator(m, 1, times.iter().map(|&t| f(t)));
        Trajectory::new(times, states).unwrap()
    }

    #[test]
    fn finite_difference_examples() {
        let ts = finite_diff_derivatives(&grid_traj(|t| t, 0.1, 11)).unwrap();
        assert!(ts.derivatives().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(ts.provenance(), Provenance::FiniteDifference);

        let ts = finite_diff_derivatives(&grid_traj(|t| t * t, 0.1, 11)).unwrap();
        assert!((ts.derivative(5)[0] - 1.0).abs() < 1e-12);
        assert!((ts.derivative(0)[0] - 0.1).abs() < 1e-12);

        assert!(finite_diff_derivatives(&grid_traj(|t| t, 0.1, 2)).is_err());
    }

    #[test]
    fn central_difference_second_order() {
        let err = |dt: f64| {
            let m = (1.0 / dt).round() as usize + 1;
            let ts = finite_diff_derivatives(&grid_traj(f64::sin, dt, m)).unwrap();
            let k = m / 2;
            (ts.derivative(k)[0] - (k as f64 * dt).cos()).abs()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn thomas_reduces_to_sine_cycle() {
        let f = systems::thomas(0.2, 0.0);
        let v = f.eval(&[0.0, std::f64::consts::FRAC_PI_2, 0.0]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);
        // beta term: x2 cos(x1) in the first component
        let g = systems::thomas(0.25, 0.15);
        let x = [0.3, -0.4, 0.9];
        let want = (-0.4f64).sin() - 0.25 * 0.3 - 0.15 * (-0.4) * 0.3f64.cos();
        assert!((g.eval(&x).unwrap()[0] - want).abs() < 1e-15);
        let want3 = 0.3f64.sin() - 0.25 * 0.9 - 0.15 * 0.3 * 0.9f64.cos();
        assert!((g.eval(&x).unwrap()[2] - want3).abs() < 1e-15);
    }

    #[test]
    fn trajectory_validation() {
        let ok = Trajectory::new(vec![0.0, 0.5, 1.0], DMatrix::zeros(3, 1));
        assert!(ok.is_ok());
        assert!(Trajectory::new(vec![0.0, 0.5, 1.5], DMatrix::zeros(3, 1)).is_err());
        assert!(Trajectory::new(vec![0.0, 0.5], DMatrix::zeros(3, 1)).is_err());
        let mut bad = DMatrix::zeros(2, 1);
        bad[(1, 0)] = f64::NAN;
        assert!(Trajectory::new(vec![0.0, 0.5], bad).is_err());
    }
}
