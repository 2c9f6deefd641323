//! PCA reduction of high-dimensional snapshots followed by identification in
//! the reduced coordinates.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;

use crate::dictionary::builtin;
use crate::dynamics::{finite_diff_derivatives, integrate_sampled, Trajectory, VectorField};
use crate::error::{Error, Result};
use crate::qendy::{fit, FitOptions};
use crate::quadmodel::{QuadraticModel, SimulateOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    pub mean: DVector<f64>,
    /// `k × D`, orthonormal rows.
    pub components: DMatrix<f64>,
    /// Leading `k` singular values, non-increasing.
    pub singular_values: Vec<f64>,
    /// All singular values of the centred data.
    pub spectrum: Vec<f64>,
}

impl PcaBasis {
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.components.ncols()
    }

    /// Fraction of the total variance carried by each kept component.
    pub fn explained_ratio(&self) -> Vec<f64> {
        let total: f64 = self.spectrum.iter().map(|s| s * s).sum();
        self.singular_values
            .iter()
            .map(|s| if total > 0.0 { s * s / total } else { 0.0 })
            .collect()
    }
}

/// Mean-centred SVD; each component's largest-magnitude entry is made
/// positive.
pub fn pca_fit(data: &DMatrix<f64>, k: usize) -> Result<PcaBasis> {
    let (m, d) = data.shape();
    if m < 2 {
        return Err(Error::input(format!("PCA needs at least 2 snapshots, got {m}")));
    }
    if k == 0 || k > m.min(d) {
        return Err(Error::config(format!("k must lie in 1..={}, got {k}", m.min(d))));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("data contains non-finite values"));
    }
    let mean = DVector::from_iterator(d, data.column_iter().map(|c| c.mean()));
    let mut centred = data.clone();
    for mut row in centred.row_iter_mut() {
        row -= mean.transpose();
    }
    let svd = centred.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numeric("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    let spectrum: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut components = DMatrix::zeros(k, d);
    for (r, &i) in order.iter().take(k).enumerate() {
        let mut row = v_t.row(i).into_owned();
        let pivot = row.iter().copied().fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            row = -row;
        }
        components.row_mut(r).copy_from(&row);
    }
    Ok(PcaBasis {
        mean,
        components,
        singular_values: spectrum[..k].to_vec(),
        spectrum,
    })
}

/// `(data − mean) · componentsᵀ`.
pub fn project(data: &DMatrix<f64>, basis: &PcaBasis) -> Result<DMatrix<f64>> {
    if data.ncols() != basis.ambient_dim() {
        return Err(Error::input(format!(
            "data has {} columns, basis expects {}",
            data.ncols(),
            basis.ambient_dim()
        )));
    }
    let mut centred = data.clone();
    for mut row in centred.row_iter_mut() {
        row -= basis.mean.transpose();
    }
    Ok(centred * basis.components.transpose())
}

/// `reduced · components + mean`.
pub fn lift(reduced: &DMatrix<f64>, basis: &PcaBasis) -> Result<DMatrix<f64>> {
    if reduced.ncols() != basis.k() {
        return Err(Error::input(format!(
            "reduced data has {} columns, basis has {} components",
            reduced.ncols(),
            basis.k()
        )));
    }
    let mut out = reduced * &basis.components;
    for mut row in out.row_iter_mut() {
        row += basis.mean.transpose();
    }
    Ok(out)
}

/// Random `k × D` matrix with orthonormal rows.
pub fn random_orthonormal_rows(k: usize, d: usize, seed: u64) -> Result<DMatrix<f64>> {
    if k == 0 || k > d {
        return Err(Error::config(format!("need 1 <= k <= D, got k={k}, D={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, k, |_, _| StandardNormal.sample(&mut rng));
    let q = g.qr().q();
    Ok(q.transpose())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftConfig {
    pub ambient_dim: usize,
    pub samples: usize,
    pub t_end: f64,
    pub noise: f64,
    pub seed: u64,
    /// Largest RK4 step used to produce the samples.
    pub max_step: f64,
}

impl Default for LiftConfig {
    fn default() -> Self {
        LiftConfig {
            ambient_dim: 100,
            samples: 6000,
            t_end: 60.0,
            noise: 1e-3,
            seed: 0,
            max_step: 1e-2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticLift {
    /// `m × D` snapshots.
    pub data: DMatrix<f64>,
    pub latent: Trajectory,
    /// `n × D` orthonormal lift.
    pub q: DMatrix<f64>,
    pub dt: f64,
}

/// Integrates `f` from `x0`, maps the states through a random orthonormal
/// `Q` and adds Gaussian noise of standard deviation `cfg.noise`.
pub fn synthetic_lift<F: VectorField + ?Sized>(f: &F, x0: &[f64], cfg: &LiftConfig) -> Result<SyntheticLift> {
    if !(cfg.noise >= 0.0) || !cfg.noise.is_finite() {
        return Err(Error::config("noise level must be finite and non-negative"));
    }
    let latent = integrate_sampled(f, x0, cfg.t_end, cfg.samples, cfg.max_step)?;
    let q = random_orthonormal_rows(f.dim(), cfg.ambient_dim, cfg.seed)?;
    let mut data = latent.states() * &q;
    if cfg.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        let normal = Normal::new(0.0, cfg.noise).map_err(|e| Error::config(e.to_string()))?;
        for v in data.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let dt = latent.dt();
    Ok(SyntheticLift { data, latent, q, dt })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub k: usize,
    pub train_fraction: f64,
    pub dt: f64,
    pub lambda: f64,
    /// RK4 steps per sampling interval when simulating the model.
    pub substeps: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: 3,
            train_fraction: 0.8,
            dt: 1.0,
            lambda: 0.0,
            substeps: 10,
        }
    }
}

/// Relative RMS errors `‖ŷ − y‖ / ‖y‖` of the simulated reduced
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastReport {
    pub k: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub train_rel_rms: f64,
    pub test_rel_rms: f64,
    /// Index of the first sample the simulation could not reach.
    pub blowup: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub pca: PcaBasis,
    pub model: QuadraticModel,
    /// Reduced coordinates of all snapshots, `m × k`.
    pub reduced: DMatrix<f64>,
    /// Simulated reduced coordinates from the first snapshot, `m × k`;
    /// rows past a blowup are NaN.
    pub forecast: DMatrix<f64>,
    pub report: ForecastReport,
}

/// PCA on all snapshots, finite differences and a quadratic fit with the
/// identity dictionary on the leading `train_fraction`, then a simulation
/// over the whole horizon.
pub fn reduced_identification_pipeline(data: &DMatrix<f64>, cfg: &PipelineConfig) -> Result<PipelineResult> {
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0) {
        return Err(Error::config("train fraction must lie in (0, 1]"));
    }
    if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
        return Err(Error::config("dt must be positive"));
    }
    let m = data.nrows();
    let train = ((m as f64) * cfg.train_fraction).floor() as usize;
    if train < 3 {
        return Err(Error::config(format!("training segment has {train} samples, need 3")));
    }
    let pca = pca_fit(data, cfg.k)?;
    let reduced = project(data, &pca)?;
    let times: Vec<f64> = (0..train).map(|i| i as f64 * cfg.dt).collect();
    let traj = Trajectory::new(times, reduced.rows(0, train).into_owned())?;
    let ts = finite_diff_derivatives(&traj)?;
    let model = fit(&builtin::identity(cfg.k), &ts, &FitOptions::default().lambda(cfg.lambda))?;

    let substeps = cfg.substeps.max(1);
    let h = cfg.dt / substeps as f64;
    let y0: Vec<f64> = reduced.row(0).iter().copied().collect();
    let sim = if m > 1 {
        Some(model.simulate_with(&y0, (m - 1) as f64 * cfg.dt, h, SimulateOptions::default())?)
    } else {
        None
    };
    let mut forecast = DMatrix::from_element(m, cfg.k, f64::NAN);
    forecast.row_mut(0).copy_from(&reduced.row(0));
    let mut blowup = None;
    if let Some(sim) = sim {
        let states = sim.x.states();
        for i in 1..m {
            let idx = i * substeps;
            if idx < states.nrows() {
                forecast.row_mut(i).copy_from(&states.row(idx));
            } else if blowup.is_none() {
                blowup = Some(i);
            }
        }
    }
    let rel = |lo: usize, hi: usize| -> f64 {
        if hi <= lo {
            return f64::NAN;
        }
        let truth = reduced.rows(lo, hi - lo);
        let pred = forecast.rows(lo, hi - lo);
        (pred - truth).norm() / truth.norm()
    };
    let report = ForecastReport {
        k: cfg.k,
        train_samples: train,
        test_samples: m - train,
        train_rel_rms: rel(0, train),
        test_rel_rms: rel(train, m),
        blowup,
    };
    Ok(PipelineResult {
        pca,
        model,
        reduced,
        forecast,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::systems;

    #[test]
    fn line_in_3d() {
        let data = DMatrix::from_fn(20, 3, |i, j| (i as f64) * [1.0, 2.0, -1.0][j]);
        let p = pca_fit(&data, 2).unwrap();
        assert!(p.spectrum[0] > 0.0);
        assert!(p.spectrum[1] < 1e-10 && p.spectrum[2] < 1e-10);
        let r = p.explained_ratio();
        assert!(r[0] >= r[1] && r.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn components_are_orthonormal_and_sign_fixed() {
        let data = DMatrix::from_fn(30, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 - 0.3 * j as f64);
        let p = pca_fit(&data, 3).unwrap();
        let gram = &p.components * p.components.transpose();
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-10);
        for row in p.components.row_iter() {
            let pivot = row.iter().copied().fold(0.0f64, |b, v| if v.abs() > b.abs() { v } else { b });
            assert!(pivot > 0.0);
        }
        assert!(p.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn degenerate_data_has_zero_spectrum() {
        let data = DMatrix::from_element(5, 3, 2.0);
        let p = pca_fit(&data, 1).unwrap();
        assert!(p.spectrum.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn projection_round_trip_on_exact_lift() {
        let y = DMatrix::from_fn(40, 3, |i, j| ((i as f64) * 0.1 * (j + 1) as f64).sin());
        let q = random_orthonormal_rows(3, 20, 4).unwrap();
        let data = &y * &q;
        let p = pca_fit(&data, 3).unwrap();
        let back = lift(&project(&data, &p).unwrap(), &p).unwrap();
        assert!((back - &data).amax() < 1e-8);
        // principal angles: Q's rows lie in the recovered span
        let resid = &q - (&q * p.components.transpose()) * &p.components;
        assert!(resid.amax() < 1e-8);
    }

    #[test]
    fn mean_row_projects_to_zero() {
        let data = DMatrix::from_fn(10, 4, |i, j| (i * j) as f64);
        let p = pca_fit(&data, 2).unwrap();
        let z = project(&DMatrix::from_row_slice(1, 4, p.mean.as_slice()), &p).unwrap();
        assert!(z.amax() < 1e-12);
        let back = lift(&DMatrix::zeros(3, 2), &p).unwrap();
        for row in back.row_iter() {
            assert!((row - p.mean.transpose()).amax() == 0.0);
        }
        assert!(project(&DMatrix::zeros(1, 3), &p).is_err());
    }

    #[test]
    fn eckart_young() {
        let data = DMatrix::from_fn(25, 6, |i, j| ((i as f64 + 1.0) * (j as f64 + 0.5)).cos());
        let p = pca_fit(&data, 2).unwrap();
        let back = lift(&project(&data, &p).unwrap(), &p).unwrap();
        let mut centred = data.clone();
        for mut row in centred.row_iter_mut() {
            row -= p.mean.transpose();
        }
        let err = (&data - back).norm_squared();
        let tail: f64 = p.spectrum[2..].iter().map(|s| s * s).sum();
        assert!((err - tail).abs() <= 1e-8 * tail.max(1e-300));
    }

    #[test]
    fn rotation_eigenvalues_recovered() {
        // three whole periods without repeating the first sample, so the
        // snapshot mean is the circle's centre
        let cfg = LiftConfig {
            ambient_dim: 50,
            samples: 2000,
            t_end: 6.0 * std::f64::consts::PI * 1999.0 / 2000.0,
            noise: 0.0,
            seed: 1,
            max_step: 1e-3,
        };
        let lifted = synthetic_lift(&systems::rotation(), &[1.0, 0.0], &cfg).unwrap();
        let out = reduced_identification_pipeline(
            &lifted.data,
            &PipelineConfig {
                k: 2,
                dt: lifted.dt,
                ..PipelineConfig::default()
            },
        )
        .unwrap();
        let h = out.model.hurwitz_margin().unwrap();
        for (re, im) in h.spectrum {
            assert!(re.abs() < 1e-3 && (im.abs() - 1.0).abs() < 1e-3, "{re} {im}");
        }
    }
}
