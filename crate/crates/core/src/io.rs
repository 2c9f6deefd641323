//! CSV and JSON formats for trajectories, training data, dictionaries,
//! models, PCA bases and study tables.
//!
//! Every reader takes a string or `Read` so it can be driven from memory;
//! the `*_path` helpers wrap files.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::approx::{StudyResult, StudyRow, StudySummary};
use crate::baselines::{GedmdModel, SindyModel};
use crate::dictionary::Dictionary;
use crate::dynamics::{Provenance, TrainingSet, Trajectory};
use crate::error::{Error, Result};
use crate::quadmodel::{ModelMeta, QuadraticModel};
use crate::reduction::PcaBasis;

/// Upper bound on dictionary size accepted from files.
pub const MAX_BASIS: usize = 4096;

/// Shortest round-trip form, switching to exponent notation for very large
/// or small magnitudes.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(field: &str, row: usize, col: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::input(format!("row {row}, column {col}: not a number: {field:?}")))
}

/// Reads all records with `expected` columns; `header` is checked when
/// given.
fn read_table<R: Read>(r: R, header: Option<&[String]>) -> Result<(Vec<f64>, usize)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header.is_some())
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut width = header.map(<[String]>::len);
    if let Some(want) = header {
        let got: Vec<&str> = reader.headers()?.iter().collect();
        if got != want.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::input(format!("expected header {:?}, found {:?}", want.join(","), got.join(","))));
        }
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::input(format!("row {} has {} fields, expected {w}", i + 1, rec.len())));
        }
        for (j, f) in rec.iter().enumerate() {
            data.push(parse_f64(f, i + 1, j + 1)?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::input("no data rows"));
    }
    Ok((data, width.unwrap_or(0)))
}

fn write_records<W: Write>(w: W, header: Option<Vec<String>>, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().from_writer(w);
    if let Some(h) = header {
        wr.write_record(&h)?;
    }
    for row in rows {
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes numeric rows under an optional header.
pub fn write_table<W: Write>(w: W, header: Option<Vec<String>>, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    write_records(w, header, rows.map(|r| r.into_iter().map(fmt).collect()))
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn header_dim<R: Read>(r: &mut R) -> Result<(String, usize)> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let first = text.lines().next().ok_or_else(|| Error::input("empty file"))?;
    let n = first.split(',').count();
    Ok((text, n))
}

/// Header `t,x1,…,xn`.
pub fn read_trajectory_csv<R: Read>(mut r: R) -> Result<Trajectory> {
    let (text, cols) = header_dim(&mut r)?;
    if cols < 2 {
        return Err(Error::input("trajectory needs a time column and at least one state"));
    }
    let mut header = vec!["t".to_string()];
    header.extend(names("x", cols - 1));
    let (data, w) = read_table(text.as_bytes(), Some(&header))?;
    let m = data.len() / w;
    let all = DMatrix::from_row_slice(m, w, &data);
    let times = all.column(0).iter().copied().collect();
    Trajectory::new(times, all.columns(1, w - 1).into_owned())
}

pub fn write_trajectory_csv<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(names("x", traj.dim()));
    write_table(
        w,
        Some(header),
        (0..traj.len()).map(|k| {
            let mut row = vec![traj.times()[k]];
            row.extend(traj.state(k));
            row
        }),
    )
}

/// Header `x1,…,xn,dx1,…,dxn`. Provenance is not stored in the file.
pub fn read_training_csv<R: Read>(mut r: R, provenance: Provenance) -> Result<TrainingSet> {
    let (text, cols) = header_dim(&mut r)?;
    if cols < 2 || cols % 2 != 0 {
        return Err(Error::input("training data needs n state and n derivative columns"));
    }
    let n = cols / 2;
    let mut header = names("x", n);
    header.extend(names("dx", n));
    let (data, w) = read_table(text.as_bytes(), Some(&header))?;
    let m = data.len() / w;
    let all = DMatrix::from_row_slice(m, w, &data);
    TrainingSet::new(
        all.columns(0, n).into_owned(),
        all.columns(n, n).into_owned(),
        provenance,
    )
}

pub fn write_training_csv<W: Write>(w: W, ts: &TrainingSet) -> Result<()> {
    let n = ts.dim();
    let mut header = names("x", n);
    header.extend(names("dx", n));
    write_table(
        w,
        Some(header),
        (0..ts.len()).map(|k| {
            let mut row = ts.state(k);
            row.extend(ts.derivative(k));
            row
        }),
    )
}

/// Headerless `m × D` matrix.
pub fn read_matrix_csv<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let (data, w) = read_table(r, None)?;
    Ok(DMatrix::from_row_slice(data.len() / w, w, &data))
}

pub fn write_matrix_csv<W: Write>(w: W, m: &DMatrix<f64>) -> Result<()> {
    write_table(w, None, m.row_iter().map(|r| r.iter().copied().collect()))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], shape: (usize, usize), what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(Error::input(format!("{what} must be {}x{}", shape.0, shape.1)));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::input(format!("{what} has non-finite entries")));
    }
    Ok(DMatrix::from_row_slice(shape.0, shape.1, &flat))
}

/// Dictionary file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryFile {
    pub state_dim: usize,
    pub basis: Vec<String>,
    /// Row-major `n × N` projection with `x = G φ(x)`.
    #[serde(default, rename = "G", skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<Vec<f64>>>,
    /// Box on which a supplied `G` is checked; `[-1, 1]ⁿ` by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<(f64, f64)>>,
}

impl DictionaryFile {
    pub fn from_dictionary(d: &Dictionary) -> Self {
        DictionaryFile {
            state_dim: d.state_dim(),
            basis: d.names().to_vec(),
            g: d.explicit_full_state().map(rows_of),
            domain: None,
        }
    }

    pub fn build(&self) -> Result<Dictionary> {
        if self.basis.len() > MAX_BASIS {
            return Err(Error::input(format!("more than {MAX_BASIS} basis functions")));
        }
        if self.state_dim > self.basis.len() {
            return Err(Error::input("state dimension exceeds the number of basis functions"));
        }
        let refs: Vec<&str> = self.basis.iter().map(String::as_str).collect();
        let d = Dictionary::parse(self.state_dim, &refs)?;
        match &self.g {
            None => Ok(d),
            Some(rows) => {
                let g = matrix_from_rows(rows, (self.state_dim, d.len()), "G")?;
                let domain = self
                    .domain
                    .clone()
                    .unwrap_or_else(|| vec![(-1.0, 1.0); self.state_dim]);
                d.with_full_state_matrix(g, &domain, 0)
            }
        }
    }
}

pub fn dictionary_from_json(text: &str) -> Result<Dictionary> {
    serde_json::from_str::<DictionaryFile>(text)?.build()
}

pub fn dictionary_to_json(d: &Dictionary) -> Result<String> {
    Ok(serde_json::to_string_pretty(&DictionaryFile::from_dictionary(d))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    state_dim: usize,
    dictionary: DictionaryFile,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<f64>,
    #[serde(rename = "G")]
    g: Vec<Vec<f64>>,
    lambda: f64,
    m: usize,
    provenance: Provenance,
    #[serde(default)]
    force_c_zero: bool,
}

pub fn model_to_json(model: &QuadraticModel) -> Result<String> {
    let meta = model.meta();
    let file = ModelFile {
        state_dim: model.state_dim(),
        dictionary: DictionaryFile::from_dictionary(model.dictionary()),
        a: rows_of(model.a()),
        b: rows_of(model.b()),
        c: model.c().iter().copied().collect(),
        g: rows_of(model.g()),
        lambda: meta.lambda,
        m: meta.m,
        provenance: meta.provenance,
        force_c_zero: meta.force_c_zero,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn model_from_json(text: &str) -> Result<QuadraticModel> {
    let f: ModelFile = serde_json::from_str(text)?;
    let d = f.dictionary.build()?;
    if d.state_dim() != f.state_dim {
        return Err(Error::input("state_dim disagrees with the dictionary"));
    }
    let n = d.len();
    if n > 256 {
        return Err(Error::input("model dictionary too large"));
    }
    let a = matrix_from_rows(&f.a, (n, n * n), "A")?;
    let b = matrix_from_rows(&f.b, (n, n), "B")?;
    let c = matrix_from_rows(std::slice::from_ref(&f.c), (1, n), "C")?.transpose();
    let g = matrix_from_rows(&f.g, (f.state_dim, n), "G")?;
    let meta = ModelMeta {
        m: f.m,
        lambda: f.lambda,
        force_c_zero: f.force_c_zero,
        provenance: f.provenance,
    };
    QuadraticModel::new(d, a, b, DVector::from_column_slice(c.as_slice()), g, meta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearModelFile {
    state_dim: usize,
    dictionary: DictionaryFile,
    #[serde(rename = "Xi", default, skip_serializing_if = "Option::is_none")]
    xi: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Theta", default, skip_serializing_if = "Option::is_none")]
    theta: Option<Vec<Vec<f64>>>,
}

/// A SINDy or gEDMD model read from JSON.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearModel {
    Sindy(SindyModel),
    Gedmd(GedmdModel),
}

pub fn sindy_to_json(m: &SindyModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&LinearModelFile {
        state_dim: m.dictionary().state_dim(),
        dictionary: DictionaryFile::from_dictionary(m.dictionary()),
        xi: Some(rows_of(m.xi())),
        theta: None,
    })?)
}

pub fn gedmd_to_json(m: &GedmdModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&LinearModelFile {
        state_dim: m.dictionary().state_dim(),
        dictionary: DictionaryFile::from_dictionary(m.dictionary()),
        xi: None,
        theta: Some(rows_of(m.theta())),
    })?)
}

pub fn linear_model_from_json(text: &str) -> Result<LinearModel> {
    let f: LinearModelFile = serde_json::from_str(text)?;
    let d = f.dictionary.build()?;
    if d.state_dim() != f.state_dim {
        return Err(Error::input("state_dim disagrees with the dictionary"));
    }
    let n = d.len();
    match (f.xi, f.theta) {
        (Some(xi), None) => Ok(LinearModel::Sindy(SindyModel::new(
            d,
            matrix_from_rows(&xi, (f.state_dim, n), "Xi")?,
        )?)),
        (None, Some(theta)) => Ok(LinearModel::Gedmd(GedmdModel::new(
            d,
            matrix_from_rows(&theta, (n, n), "Theta")?,
        )?)),
        _ => Err(Error::input("exactly one of Xi and Theta must be present")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PcaFile {
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
    singular_values: Vec<f64>,
    #[serde(default)]
    spectrum: Vec<f64>,
}

pub fn pca_to_json(p: &PcaBasis) -> Result<String> {
    Ok(serde_json::to_string_pretty(&PcaFile {
        mean: p.mean.iter().copied().collect(),
        components: rows_of(&p.components),
        singular_values: p.singular_values.clone(),
        spectrum: p.spectrum.clone(),
    })?)
}

pub fn pca_from_json(text: &str) -> Result<PcaBasis> {
    let f: PcaFile = serde_json::from_str(text)?;
    let k = f.singular_values.len();
    let d = f.mean.len();
    let components = matrix_from_rows(&f.components, (k, d), "components")?;
    let spectrum = if f.spectrum.is_empty() {
        f.singular_values.clone()
    } else {
        f.spectrum
    };
    Ok(PcaBasis {
        mean: DVector::from_vec(f.mean),
        components,
        singular_values: f.singular_values,
        spectrum,
    })
}

/// `m,run,e_R,e_s1,…,e_sN`.
pub fn write_study_runs<W: Write>(w: W, rows: &[StudyRow]) -> Result<()> {
    let n = rows.first().map_or(0, |r| r.e_s.len());
    let mut header = vec!["m".to_string(), "run".to_string(), "e_R".to_string()];
    header.extend(names("e_s", n));
    write_records(
        w,
        Some(header),
        rows.iter().map(|r| {
            let mut row = vec![r.m.to_string(), r.run.to_string(), fmt(r.e_r)];
            row.extend(r.e_s.iter().map(|&v| fmt(v)));
            row
        }),
    )
}

/// `m,e_R_mean,e_s_mean`.
pub fn write_study_summary<W: Write>(w: W, summary: &[StudySummary]) -> Result<()> {
    write_records(
        w,
        Some(vec!["m".into(), "e_R_mean".into(), "e_s_mean".into()]),
        summary.iter().map(|s| vec![s.m.to_string(), fmt(s.e_r_mean), fmt(s.e_s_mean)]),
    )
}

pub fn write_study<W: Write>(runs: W, summary: W, result: &StudyResult) -> Result<()> {
    write_study_runs(runs, &result.rows)?;
    write_study_summary(summary, &result.summary)
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

pub fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}
