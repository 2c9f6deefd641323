//! Run configuration: a JSON or TOML file merged with command-line flags.

use std::path::{Path, PathBuf};

use qendy::approx::{ErrorMetric, DEFAULT_QUADRATURE_ORDER};
use qendy::dictionary::builtin;
use qendy::dynamics::{systems, ExprField};
use qendy::{io, Dictionary};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every key any command reads. Unknown keys are rejected; keys a command
/// does not use are ignored by it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<String>,
    pub damping: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Built-in dictionary name, `identity`, or a dictionary JSON path.
    pub dictionary: Option<String>,
    pub method: Option<Method>,
    /// `uniform` draws states from `domain`; `trajectory` integrates from `x0`.
    pub sampling: Option<Sampling>,
    pub derivatives: Option<Derivatives>,
    pub domain: Option<Vec<(f64, f64)>>,
    pub x0: Option<Vec<f64>>,
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
    pub force_c_zero: Option<bool>,
    pub threshold: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub max_step: Option<f64>,
    pub reembed: Option<bool>,
    /// Training CSV for `fit`, high-dimensional CSV for `reduce`.
    pub data: Option<PathBuf>,
    /// Model JSON for `simulate` and `report`.
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub m_list: Option<Vec<usize>>,
    pub runs: Option<usize>,
    pub metric: Option<Metric>,
    pub quadrature_order: Option<usize>,
    pub k: Option<usize>,
    pub train_fraction: Option<f64>,
    pub ambient_dim: Option<usize>,
    pub samples: Option<usize>,
    pub noise: Option<f64>,
    pub substeps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Qendy,
    Sindy,
    Gedmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    Uniform,
    Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Derivatives {
    Exact,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    MeanAbs,
    Relative,
}

impl From<Metric> for ErrorMetric {
    fn from(m: Metric) -> Self {
        match m {
            Metric::MeanAbs => ErrorMetric::MeanAbs,
            Metric::Relative => ErrorMetric::Relative,
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_str_with_format(text: &str, toml_format: bool) -> Result<Self, CliError> {
        if toml_format {
            toml::from_str(text).map_err(|e| bad(e.to_string()))
        } else {
            serde_json::from_str(text).map_err(|e| bad(e.to_string()))
        }
    }

    /// `.toml` files are read as TOML, everything else as JSON.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let toml_format = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        Self::from_str_with_format(&text, toml_format)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(self, other: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            system, damping, alpha, beta, dictionary, method, sampling, derivatives, domain, x0, m,
            seed, lambda, force_c_zero, threshold, dt, t_end, max_step, reembed, data, model, out,
            m_list, runs, metric, quadrature_order, k, train_fraction, ambient_dim, samples, noise,
            substeps
        )
    }

    /// Checks every value that is present, independent of the command.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(bad(format!("{name} must be positive and finite"))),
            _ => Ok(()),
        };
        let finite = |name: &str, v: Option<f64>| match v {
            Some(x) if !x.is_finite() => Err(bad(format!("{name} must be finite"))),
            _ => Ok(()),
        };
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        positive("max_step", self.max_step)?;
        positive("threshold", self.threshold)?;
        finite("damping", self.damping)?;
        finite("alpha", self.alpha)?;
        finite("beta", self.beta)?;
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(bad("lambda must be finite and non-negative"));
            }
        }
        if let Some(n) = self.noise {
            if !(n >= 0.0 && n.is_finite()) {
                return Err(bad("noise must be finite and non-negative"));
            }
        }
        if let Some(f) = self.train_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(bad("train_fraction must lie in (0, 1]"));
            }
        }
        if let Some(x0) = &self.x0 {
            if x0.is_empty() || x0.iter().any(|v| !v.is_finite()) {
                return Err(bad("x0 must be a non-empty list of finite numbers"));
            }
        }
        if let Some(d) = &self.domain {
            if d.is_empty() || d.iter().any(|(lo, hi)| !(lo < hi && lo.is_finite() && hi.is_finite())) {
                return Err(bad("domain must be a non-empty list of finite [lo, hi] with lo < hi"));
            }
        }
        for (name, v) in [
            ("m", self.m),
            ("runs", self.runs),
            ("k", self.k),
            ("ambient_dim", self.ambient_dim),
            ("samples", self.samples),
            ("substeps", self.substeps),
            ("quadrature_order", self.quadrature_order),
        ] {
            if v == Some(0) {
                return Err(bad(format!("{name} must be at least 1")));
            }
        }
        if let Some(list) = &self.m_list {
            if list.is_empty() || list.contains(&0) {
                return Err(bad("m_list must be a non-empty list of positive sizes"));
            }
        }
        if let Some(name) = &self.system {
            SystemSpec::lookup(name)?;
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn system(&self) -> Result<SystemSpec, CliError> {
        let mut spec = SystemSpec::lookup(self.system.as_deref().unwrap_or("pendulum"))?;
        match spec.kind {
            SystemKind::Pendulum => {
                if let Some(c) = self.damping {
                    spec.params = vec![c];
                }
            }
            SystemKind::Thomas => {
                if let Some(a) = self.alpha {
                    spec.params[0] = a;
                }
                if let Some(b) = self.beta {
                    spec.params[1] = b;
                }
            }
            _ => {}
        }
        Ok(spec)
    }

    /// The dictionary named in the config, or the system's default one.
    pub fn dictionary(&self, system: &SystemSpec) -> Result<Dictionary, CliError> {
        let name = self.dictionary.as_deref().unwrap_or(system.dictionary);
        resolve_dictionary(name, system.dim)
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order.unwrap_or(DEFAULT_QUADRATURE_ORDER)
    }
}

pub fn resolve_dictionary(name: &str, dim: usize) -> Result<Dictionary, CliError> {
    if name == "identity" {
        return Ok(builtin::identity(dim));
    }
    if let Some(d) = builtin::by_name(name) {
        return Ok(d);
    }
    let text = io::read_to_string(Path::new(name)).map_err(|e| CliError::stage("read dictionary", e))?;
    io::dictionary_from_json(&text).map_err(|e| CliError::stage("read dictionary", e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Pendulum,
    Rational,
    Thomas,
    LinearLift,
    QuadraticLift,
    MeanField,
    Rotation,
}

/// A benchmark system with its default experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub name: &'static str,
    pub kind: SystemKind,
    pub dim: usize,
    pub params: Vec<f64>,
    pub dictionary: &'static str,
    pub x0: Vec<f64>,
    pub t_end: f64,
    pub sampling: Sampling,
    pub m: usize,
}

pub const SYSTEM_NAMES: &[&str] = &[
    "pendulum",
    "rational",
    "thomas",
    "thomas-b",
    "linear-lift",
    "quadratic-lift",
    "mean-field",
    "rotation",
];

impl SystemSpec {
    pub fn lookup(name: &str) -> Result<Self, CliError> {
        use SystemKind::*;
        let s = |name, kind, dim, params: &[f64], dictionary, x0: &[f64], t_end, sampling, m| SystemSpec {
            name,
            kind,
            dim,
            params: params.to_vec(),
            dictionary,
            x0: x0.to_vec(),
            t_end,
            sampling,
            m,
        };
        Ok(match name {
            "pendulum" => s("pendulum", Pendulum, 2, &[0.1], "pendulum", &[1.0, 0.0], 10.0, Sampling::Uniform, 100),
            "rational" => s("rational", Rational, 1, &[], "rational", &[1.0], 5.0, Sampling::Trajectory, 11),
            "thomas" => s("thomas", Thomas, 3, &[0.2, 0.0], "thomas", &[1.0, -1.0, 0.0], 100.0, Sampling::Trajectory, 1000),
            "thomas-b" => s(
                "thomas-b",
                Thomas,
                3,
                &[0.25, 0.15],
                "thomas-extended",
                &[1.0, -1.0, 0.0],
                100.0,
                Sampling::Trajectory,
                1000,
            ),
            "linear-lift" => s("linear-lift", LinearLift, 2, &[], "linear-lift", &[0.5, 0.5], 1.0, Sampling::Uniform, 100),
            "quadratic-lift" => {
                s("quadratic-lift", QuadraticLift, 2, &[], "quadratic-lift", &[0.5, 0.5], 1.0, Sampling::Uniform, 100)
            }
            "mean-field" => s(
                "mean-field",
                MeanField,
                3,
                &[0.1, 1.0, -0.1, 10.0],
                "identity",
                &[0.1, 0.0, 0.01],
                60.0,
                Sampling::Trajectory,
                6000,
            ),
            "rotation" => s("rotation", Rotation, 2, &[], "identity", &[1.0, 0.0], 10.0, Sampling::Trajectory, 1000),
            other => {
                return Err(bad(format!(
                    "unknown system {other:?}; expected one of {}",
                    SYSTEM_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn field(&self) -> ExprField {
        let p = &self.params;
        match self.kind {
            SystemKind::Pendulum => systems::pendulum(p[0]),
            SystemKind::Rational => systems::rational(),
            SystemKind::Thomas => systems::thomas(p[0], p[1]),
            SystemKind::LinearLift => systems::linear_lift(),
            SystemKind::QuadraticLift => systems::quadratic_lift(),
            SystemKind::MeanField => systems::mean_field(p[0], p[1], p[2], p[3]),
            SystemKind::Rotation => systems::rotation(),
        }
    }
}
