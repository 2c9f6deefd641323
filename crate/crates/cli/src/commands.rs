//! One function per subcommand. Each reads its inputs, writes artifacts to
//! the output directory and prints a short summary.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use qendy::approx::{convergence_study, StudyConfig};
use qendy::baselines::{gedmd_fit, sindy_fit, SindyModel};
use qendy::dynamics::{
    exact_derivatives, finite_diff_derivatives, integrate_sampled, rk4_integrate_partial, sample_uniform, Integration,
};
use qendy::io::{self, LinearModel};
use qendy::qendy::{build_data_matrices, loss};
use qendy::quadmodel::{SimulateOptions, DEFAULT_SPARSITY_THRESHOLD};
use qendy::reduction::{reduced_identification_pipeline, synthetic_lift, LiftConfig, PipelineConfig};
use qendy::{fit as qendy_fit, FitOptions, Provenance, QuadraticModel, Trajectory, VectorField};
use serde::Serialize;
use serde_json::json;

use crate::config::{resolve_dictionary, Derivatives, Method, RunConfig, Sampling, SystemSpec};
use crate::{CliError, StageExt};

const DEFAULT_MAX_STEP: f64 = 1e-2;
const DEFAULT_SIM_DT: f64 = 1e-2;
const DEFAULT_SIM_T_END: f64 = 10.0;
const DEFAULT_M_LIST: [usize; 4] = [100, 1000, 10_000, 100_000];
const DEFAULT_RUNS: usize = 100;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out_dir().join(name)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = io::create(path).stage("write output")?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::stage("write output", e.into()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut w = io::create(path).stage("write output")?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

fn write_csv(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = io::create(path).stage("write output")?;
    io::write_table(&mut w, Some(header), rows).stage("write output")?;
    w.flush()?;
    Ok(())
}

fn row_string(v: impl IntoIterator<Item = f64>) -> String {
    let parts: Vec<String> = v.into_iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn check_dim(what: &str, got: usize, want: usize) -> Result<(), CliError> {
    if got != want {
        return Err(config_err(format!("{what} has dimension {got}, expected {want}")));
    }
    Ok(())
}

fn default_domain(n: usize) -> Vec<(f64, f64)> {
    vec![(-1.0, 1.0); n]
}

pub fn generate(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let sys = cfg.system()?;
    let f = sys.field();
    let seed = cfg.seed.unwrap_or(0);
    let m = cfg.m.unwrap_or(sys.m);
    let derivatives = cfg.derivatives.unwrap_or(Derivatives::Exact);
    let ts = match cfg.sampling.unwrap_or(sys.sampling) {
        Sampling::Uniform => {
            if derivatives == Derivatives::FiniteDifference {
                return Err(config_err("finite-difference derivatives need trajectory sampling"));
            }
            let domain = cfg.domain.clone().unwrap_or_else(|| default_domain(sys.dim));
            check_dim("domain", domain.len(), sys.dim)?;
            let states = sample_uniform(&domain, m, seed).stage("sample")?;
            exact_derivatives(&f, &states).stage("derivatives")?
        }
        Sampling::Trajectory => {
            let x0 = cfg.x0.clone().unwrap_or_else(|| sys.x0.clone());
            check_dim("x0", x0.len(), sys.dim)?;
            let t_end = cfg.t_end.unwrap_or(sys.t_end);
            let max_step = cfg.max_step.unwrap_or(DEFAULT_MAX_STEP);
            let traj = integrate_sampled(&f, &x0, t_end, m, max_step).stage("integrate")?;
            let path = out_path(cfg, "trajectory.csv");
            let mut w = io::create(&path).stage("write output")?;
            io::write_trajectory_csv(&mut w, &traj).stage("write output")?;
            w.flush()?;
            match derivatives {
                Derivatives::Exact => exact_derivatives(&f, traj.states()).stage("derivatives")?,
                Derivatives::FiniteDifference => finite_diff_derivatives(&traj).stage("derivatives")?,
            }
        }
    };
    let path = out_path(cfg, "training.csv");
    let mut w = io::create(&path).stage("write output")?;
    io::write_training_csv(&mut w, &ts).stage("write output")?;
    w.flush()?;
    writeln!(
        out,
        "generate: {} samples of {} ({} derivatives) -> {}",
        ts.len(),
        sys.name,
        ts.provenance(),
        path.display()
    )?;
    Ok(())
}

pub fn fit(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let data = cfg.data.clone().unwrap_or_else(|| out_path(cfg, "training.csv"));
    let ts = io::read_training_csv(io::open(&data).stage("read training data")?, Provenance::External)
        .stage("read training data")?;
    let dict_name = match &cfg.dictionary {
        Some(name) => name.clone(),
        None => cfg.system()?.dictionary.to_string(),
    };
    let d = resolve_dictionary(&dict_name, ts.dim())?;
    check_dim("dictionary state", d.state_dim(), ts.dim())?;
    match cfg.method.unwrap_or(Method::Qendy) {
        Method::Qendy => {
            let lambda = cfg.lambda.unwrap_or(0.0);
            let opts = FitOptions::default()
                .lambda(lambda)
                .force_c_zero(cfg.force_c_zero.unwrap_or(false));
            let model = qendy_fit(&d, &ts, &opts).stage("fit")?;
            let dm = build_data_matrices(&d, &ts).stage("fit")?;
            let l = loss(&model, &dm, lambda).stage("fit")?;
            let sparsity = model.sparsity_report(cfg.threshold.unwrap_or(DEFAULT_SPARSITY_THRESHOLD));
            let hurwitz = model.hurwitz_margin().stage("spectrum")?;
            writeln!(out, "fit: qendy on {} samples, {} basis functions", ts.len(), d.len())?;
            writeln!(out, "loss: {:.6e} (regularized {:.6e})", l.residual, l.regularized)?;
            writeln!(
                out,
                "sparsity (|v| > {:e}): A {} nonzeros, B {}, C {}, max |C| {:.3e}",
                sparsity.threshold, sparsity.a, sparsity.b, sparsity.c, sparsity.max_abs_c
            )?;
            writeln!(
                out,
                "hurwitz: stable {}, max real part {:.6e}",
                hurwitz.stable, hurwitz.max_real_part
            )?;
            for (i, row) in model.b().row_iter().enumerate() {
                writeln!(out, "B row {}: {}", i + 1, row_string(row.iter().copied()))?;
            }
            writeln!(out, "C: {}", row_string(model.c().iter().copied()))?;
            let path = out_path(cfg, "model.json");
            write_text(&path, &io::model_to_json(&model).stage("write output")?)?;
            write_json(
                &out_path(cfg, "fit_summary.json"),
                &json!({
                    "method": "qendy",
                    "samples": ts.len(),
                    "loss": l.residual,
                    "regularized_loss": l.regularized,
                    "sparsity": sparsity,
                    "hurwitz": hurwitz,
                }),
            )?;
            writeln!(out, "model -> {}", path.display())?;
        }
        Method::Sindy => {
            let model = sindy_fit(&d, &ts, cfg.threshold).stage("fit")?;
            let residual = model.residual(&ts).stage("fit")?;
            writeln!(out, "fit: sindy on {} samples, {} basis functions", ts.len(), d.len())?;
            writeln!(out, "residual: {residual:.6e}")?;
            for (i, row) in model.xi().row_iter().enumerate() {
                writeln!(out, "Xi row {}: {}", i + 1, row_string(row.iter().copied()))?;
            }
            let path = out_path(cfg, "sindy.json");
            write_text(&path, &io::sindy_to_json(&model).stage("write output")?)?;
            writeln!(out, "model -> {}", path.display())?;
        }
        Method::Gedmd => {
            let model = gedmd_fit(&d, &ts).stage("fit")?;
            writeln!(out, "fit: gedmd on {} samples, {} basis functions", ts.len(), d.len())?;
            for (i, row) in model.theta().row_iter().enumerate() {
                writeln!(out, "Theta row {}: {}", i + 1, row_string(row.iter().copied()))?;
            }
            for pair in model.koopman_eigenfunctions().stage("eigenfunctions")? {
                writeln!(
                    out,
                    "eigenvalue {:.6}{:+.6}i: coefficients {}",
                    pair.eigenvalue.re,
                    pair.eigenvalue.im,
                    row_string(pair.coefficients.iter().map(|c| c.re))
                )?;
            }
            let path = out_path(cfg, "gedmd.json");
            write_text(&path, &io::gedmd_to_json(&model).stage("write output")?)?;
            writeln!(out, "model -> {}", path.display())?;
        }
    }
    Ok(())
}

/// A model file of any of the three kinds.
pub enum AnyModel {
    Quadratic(QuadraticModel),
    Linear(LinearModel),
}

impl AnyModel {
    pub fn state_dim(&self) -> usize {
        match self {
            AnyModel::Quadratic(m) => m.state_dim(),
            AnyModel::Linear(LinearModel::Sindy(m)) => m.dictionary().state_dim(),
            AnyModel::Linear(LinearModel::Gedmd(m)) => m.dictionary().state_dim(),
        }
    }
}

/// Dispatches on the coefficient keys present in the JSON object.
pub fn parse_model(text: &str) -> qendy::Result<AnyModel> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("A").is_some() {
        io::model_from_json(text).map(AnyModel::Quadratic)
    } else {
        io::linear_model_from_json(text).map(AnyModel::Linear)
    }
}

fn load_model(cfg: &RunConfig) -> Result<AnyModel, CliError> {
    let path = cfg.model.clone().unwrap_or_else(|| out_path(cfg, "model.json"));
    let text = io::read_to_string(&path).stage("read model")?;
    parse_model(&text).stage("read model")
}

fn integrate_field<F: VectorField + ?Sized>(f: &F, x0: &[f64], steps: usize, dt: f64) -> qendy::Result<Integration> {
    rk4_integrate_partial(f, x0, steps, dt, 1)
}

pub fn simulate(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(cfg)?;
    let n = model.state_dim();
    let system = cfg.system.as_ref().map(|_| cfg.system()).transpose()?;
    let x0 = match (&cfg.x0, &system) {
        (Some(x0), _) => x0.clone(),
        (None, Some(sys)) => sys.x0.clone(),
        (None, None) => return Err(config_err("simulate needs x0 or a system")),
    };
    check_dim("x0", x0.len(), n)?;
    let dt = cfg.dt.unwrap_or(DEFAULT_SIM_DT);
    let t_end = cfg.t_end.unwrap_or(DEFAULT_SIM_T_END);
    if t_end < dt || t_end / dt > 1e8 {
        return Err(config_err("need dt <= t_end and at most 1e8 steps"));
    }
    let steps = (t_end / dt).round() as usize;

    let (model_traj, blowup): (Trajectory, Option<usize>) = match &model {
        AnyModel::Quadratic(m) => {
            let opts = SimulateOptions {
                reembed: cfg.reembed.unwrap_or(false),
            };
            let sim = m.simulate_with(&x0, t_end, dt, opts).stage("simulate model")?;
            (sim.x, sim.blowup)
        }
        AnyModel::Linear(lin) => {
            let field: SindyModel = match lin {
                LinearModel::Sindy(s) => s.clone(),
                LinearModel::Gedmd(g) => g.identify().stage("simulate model")?,
            };
            let r = integrate_field(&field, &x0, steps, dt).stage("simulate model")?;
            (r.trajectory, r.blowup)
        }
    };
    let reference = match &system {
        Some(sys) => {
            check_dim("system", sys.dim, n)?;
            let r = integrate_field(&sys.field(), &x0, steps, dt).stage("simulate reference")?;
            Some(r.trajectory)
        }
        None => None,
    };

    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}_model")));
    if reference.is_some() {
        header.extend((1..=n).map(|i| format!("x{i}_true")));
    }
    header.push("blowup".to_string());
    let (mut sup, mut sq, mut count) = (0.0f64, 0.0f64, 0usize);
    let mut rows = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let mut row = vec![k as f64 * dt];
        let model_ok = k < model_traj.len();
        let xm = if model_ok { model_traj.state(k) } else { vec![f64::NAN; n] };
        row.extend(&xm);
        if let Some(r) = &reference {
            let xt = if k < r.len() { r.state(k) } else { vec![f64::NAN; n] };
            if model_ok && k < r.len() {
                for (a, b) in xm.iter().zip(&xt) {
                    sup = sup.max((a - b).abs());
                    sq += (a - b).powi(2);
                }
                count += 1;
            }
            row.extend(xt);
        }
        row.push(if model_ok { 0.0 } else { 1.0 });
        rows.push(row);
    }
    write_csv(&out_path(cfg, "simulation.csv"), header, rows.into_iter())?;
    let horizon = (model_traj.len() - 1) as f64 * dt;
    let (sup_error, rms_error) = if reference.is_some() && count > 0 {
        (Some(sup), Some((sq / (count * n) as f64).sqrt()))
    } else {
        (None, None)
    };
    write_json(
        &out_path(cfg, "simulation_error.json"),
        &json!({
            "t_end": t_end,
            "dt": dt,
            "steps": steps,
            "blowup": blowup.is_some(),
            "blowup_time": blowup.map(|s| s as f64 * dt),
            "horizon": horizon,
            "reference": system.as_ref().map(|s| s.name),
            "sup_error": sup_error,
            "rms_error": rms_error,
        }),
    )?;
    write!(out, "simulate: {steps} steps of size {dt}")?;
    if let Some(s) = blowup {
        write!(out, ", model blew up at t = {}", s as f64 * dt)?;
    }
    if let (Some(sup), Some(rms)) = (sup_error, rms_error) {
        write!(out, ", sup error {sup:.6e}, rms error {rms:.6e} over t <= {horizon}")?;
    }
    writeln!(out)?;
    Ok(())
}

pub fn convergence(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let sys = cfg.system()?;
    let d = cfg.dictionary(&sys)?;
    check_dim("dictionary state", d.state_dim(), sys.dim)?;
    let domain = cfg.domain.clone().unwrap_or_else(|| default_domain(sys.dim));
    check_dim("domain", domain.len(), sys.dim)?;
    let study = StudyConfig {
        domain,
        m_list: cfg.m_list.clone().unwrap_or_else(|| DEFAULT_M_LIST.to_vec()),
        runs: cfg.runs.unwrap_or(DEFAULT_RUNS),
        seed: cfg.seed.unwrap_or(0),
        metric: cfg.metric.map(Into::into).unwrap_or_default(),
        quadrature_order: cfg.quadrature_order(),
    };
    let res = convergence_study(&d, &sys.field(), &study).stage("convergence study")?;
    let mut w = io::create(&out_path(cfg, "convergence_runs.csv")).stage("write output")?;
    io::write_study_runs(&mut w, &res.rows).stage("write output")?;
    w.flush()?;
    let path = out_path(cfg, "convergence.csv");
    let mut w = io::create(&path).stage("write output")?;
    io::write_study_summary(&mut w, &res.summary).stage("write output")?;
    w.flush()?;
    let slopes = (study.m_list.len() >= 2).then_some((res.slope_r, res.slope_s));
    write_json(
        &out_path(cfg, "convergence.json"),
        &json!({
            "m_list": study.m_list,
            "runs": study.runs,
            "metric": study.metric,
            "slope_R": slopes.map(|s| s.0),
            "slope_s": slopes.map(|s| s.1),
        }),
    )?;
    match slopes {
        Some((r, s)) => writeln!(out, "convergence: slope e_R {r:.4}, slope e_s {s:.4}")?,
        None => writeln!(out, "convergence: slope n/a (single sample size)")?,
    }
    writeln!(out, "table -> {}", path.display())?;
    Ok(())
}

pub fn reduce(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let (data, dt) = match &cfg.data {
        Some(path) => {
            let data = io::read_matrix_csv(io::open(path).stage("read snapshots")?).stage("read snapshots")?;
            (data, cfg.dt.unwrap_or(1.0))
        }
        None => {
            let sys = SystemSpec::lookup(cfg.system.as_deref().unwrap_or("mean-field"))?;
            let x0 = cfg.x0.clone().unwrap_or_else(|| sys.x0.clone());
            check_dim("x0", x0.len(), sys.dim)?;
            let defaults = LiftConfig::default();
            let lift_cfg = LiftConfig {
                ambient_dim: cfg.ambient_dim.unwrap_or(defaults.ambient_dim),
                samples: cfg.samples.or(cfg.m).unwrap_or(defaults.samples),
                t_end: cfg.t_end.unwrap_or(defaults.t_end),
                noise: cfg.noise.unwrap_or(defaults.noise),
                seed: cfg.seed.unwrap_or(defaults.seed),
                max_step: cfg.max_step.unwrap_or(defaults.max_step),
            };
            let lift = synthetic_lift(&sys.field(), &x0, &lift_cfg).stage("synthetic data")?;
            let dt = cfg.dt.unwrap_or(lift.dt);
            (lift.data, dt)
        }
    };
    let defaults = PipelineConfig::default();
    let pcfg = PipelineConfig {
        k: cfg.k.unwrap_or(defaults.k),
        train_fraction: cfg.train_fraction.unwrap_or(defaults.train_fraction),
        dt,
        lambda: cfg.lambda.unwrap_or(defaults.lambda),
        substeps: cfg.substeps.unwrap_or(defaults.substeps),
    };
    let res = reduced_identification_pipeline(&data, &pcfg).stage("reduction pipeline")?;
    write_text(&out_path(cfg, "pca.json"), &io::pca_to_json(&res.pca).stage("write output")?)?;
    write_text(
        &out_path(cfg, "reduced_model.json"),
        &io::model_to_json(&res.model).stage("write output")?,
    )?;
    let k = pcfg.k;
    let mut header = vec!["t".to_string()];
    header.extend((1..=k).map(|i| format!("z{i}")));
    header.extend((1..=k).map(|i| format!("z{i}_model")));
    let rows = (0..res.reduced.nrows()).map(|r| {
        let mut row = vec![r as f64 * dt];
        row.extend(res.reduced.row(r).iter());
        row.extend(res.forecast.row(r).iter());
        row
    });
    write_csv(&out_path(cfg, "forecast.csv"), header, rows)?;
    let spectrum = &res.pca.spectrum;
    let gap = (spectrum.len() > k && spectrum[k] > 0.0).then(|| spectrum[k - 1] / spectrum[k]);
    write_json(
        &out_path(cfg, "reduce_report.json"),
        &json!({
            "forecast": res.report,
            "dt": dt,
            "snapshots": data.nrows(),
            "ambient_dim": data.ncols(),
            "singular_values": spectrum,
            "spectral_gap": gap,
        }),
    )?;
    let r = &res.report;
    writeln!(
        out,
        "reduce: {} snapshots in {} dimensions, k = {}, train {} / test {}",
        data.nrows(),
        data.ncols(),
        k,
        r.train_samples,
        r.test_samples
    )?;
    if let Some(g) = gap {
        writeln!(out, "spectral gap sigma{k}/sigma{}: {g:.3}", k + 1)?;
    }
    writeln!(
        out,
        "relative RMS: train {:.6e}, test {:.6e}{}",
        r.train_rel_rms,
        r.test_rel_rms,
        if r.blowup.is_some() { " (forecast blew up)" } else { "" }
    )?;
    Ok(())
}

fn coefficient_rows(name: &str, m: &DMatrix<f64>, rows: &mut Vec<(String, usize, usize, f64)>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            rows.push((name.to_string(), i + 1, j + 1, m[(i, j)]));
        }
    }
}

fn write_coefficients(path: &Path, rows: &[(String, usize, usize, f64)]) -> Result<(), CliError> {
    let w = io::create(path).stage("write output")?;
    let mut wr = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| CliError::stage("write output", e.into());
    wr.write_record(["matrix", "row", "col", "value"]).map_err(csv_err)?;
    for (name, i, j, v) in rows {
        wr.write_record([name.clone(), i.to_string(), j.to_string(), format!("{v:?}")])
            .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn report(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(cfg)?;
    let mut coeffs = Vec::new();
    let (spectrum, summary) = match &model {
        AnyModel::Quadratic(m) => {
            let c = DMatrix::from_column_slice(m.basis_len(), 1, m.c().as_slice());
            for (name, mat) in [("A", m.a()), ("B", m.b()), ("C", &c), ("G", m.g())] {
                coefficient_rows(name, mat, &mut coeffs);
            }
            let h = m.hurwitz_margin().stage("spectrum")?;
            let s = m.sparsity_report(cfg.threshold.unwrap_or(DEFAULT_SPARSITY_THRESHOLD));
            let spectrum = h.spectrum.clone();
            (
                spectrum,
                json!({"kind": "qendy", "basis": m.dictionary().names(), "meta": m.meta(), "hurwitz": h, "sparsity": s}),
            )
        }
        AnyModel::Linear(LinearModel::Sindy(s)) => {
            coefficient_rows("Xi", s.xi(), &mut coeffs);
            (Vec::new(), json!({"kind": "sindy", "basis": s.dictionary().names()}))
        }
        AnyModel::Linear(LinearModel::Gedmd(g)) => {
            coefficient_rows("Theta", g.theta(), &mut coeffs);
            let spectrum = g
                .koopman_eigenfunctions()
                .stage("eigenfunctions")?
                .iter()
                .map(|p| (p.eigenvalue.re, p.eigenvalue.im))
                .collect();
            (spectrum, json!({"kind": "gedmd", "basis": g.dictionary().names()}))
        }
    };
    write_coefficients(&out_path(cfg, "report_coefficients.csv"), &coeffs)?;
    write_csv(
        &out_path(cfg, "report_spectrum.csv"),
        vec!["re".into(), "im".into()],
        spectrum.iter().map(|&(re, im)| vec![re, im]),
    )?;
    write_json(&out_path(cfg, "report_summary.json"), &summary)?;
    writeln!(
        out,
        "report: {} model, {} eigenvalues -> {}",
        summary["kind"].as_str().unwrap_or("?"),
        spectrum.len(),
        cfg.out_dir().display()
    )?;
    Ok(())
}
