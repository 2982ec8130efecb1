//! Dataset directories and model files.
//!
//! A dataset directory holds `manifest.json`, the predictor payload (flat little-endian
//! `f64`, row-major within each matrix, samples outermost; or one CSV row per sample) and
//! `y.csv` with a `y` column and an optional noiseless `signal` column.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::{evaluate_gsir, GsirModel};
use crate::cp::CpModel;
use crate::error::{NtsdrError, Result};
use crate::feature::{check_shapes, SampleSet};
use crate::linalg::Mat;
use crate::link::{KernelRidge, LogLink};
use crate::model::FittedModel;
use crate::tucker::TuckerModel;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MODEL_FORMAT_VERSION: u32 = 1;
const LAYOUT: &str = "row-major";
const DTYPE: &str = "f64-le";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Storage {
    Bin,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub layout: String,
    pub storage: Storage,
    pub x_path: String,
    pub y_path: String,
    pub dtype: String,
}

impl DatasetManifest {
    pub fn new(n: usize, p: usize, q: usize, storage: Storage) -> Self {
        let x_path = match storage {
            Storage::Bin => "X.bin",
            Storage::Csv => "X.csv",
        };
        DatasetManifest {
            n,
            p,
            q,
            layout: LAYOUT.into(),
            storage,
            x_path: x_path.into(),
            y_path: "y.csv".into(),
            dtype: DTYPE.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.q == 0 {
            return Err(NtsdrError::validation("manifest", "p and q must be positive"));
        }
        if self.layout != LAYOUT {
            return Err(NtsdrError::validation("layout", format!("unsupported value {:?}", self.layout)));
        }
        if self.dtype != DTYPE {
            return Err(NtsdrError::validation("dtype", format!("unsupported value {:?}", self.dtype)));
        }
        for (field, path) in [("x_path", &self.x_path), ("y_path", &self.y_path)] {
            let p = Path::new(path);
            if path.is_empty() || p.is_absolute() || p.components().any(|c| c.as_os_str() == "..") {
                return Err(NtsdrError::validation(field, format!("must be a relative path inside the dataset, got {path:?}")));
            }
        }
        Ok(())
    }
}

/// Predictors, responses and (for simulated data) the noiseless signal.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub xs: Vec<Mat>,
    pub y: Vec<f64>,
    pub signal: Option<Vec<f64>>,
}

impl Dataset {
    pub fn samples(&self) -> Result<SampleSet> {
        SampleSet::new(self.xs.clone(), self.y.clone())
    }
}

fn format_error(context: &str, e: impl std::fmt::Display) -> NtsdrError {
    NtsdrError::Format(format!("{context}: {e}"))
}

/// Writes a dataset directory, creating it if needed.
pub fn write_dataset(
    dir: &Path,
    xs: &[Mat],
    y: &[f64],
    signal: Option<&[f64]>,
    storage: Storage,
) -> Result<DatasetManifest> {
    if xs.len() != y.len() || signal.is_some_and(|s| s.len() != y.len()) {
        return Err(NtsdrError::DimensionMismatch {
            context: "dataset rows".into(),
            expected: xs.len(),
            got: y.len(),
        });
    }
    let (p, q) = xs.first().map(|x| x.shape()).ok_or_else(|| NtsdrError::InvalidArgument("empty dataset".into()))?;
    check_shapes(xs, p, q)?;
    let manifest = DatasetManifest::new(xs.len(), p, q, storage);
    fs::create_dir_all(dir)?;

    let x_path = dir.join(&manifest.x_path);
    match storage {
        Storage::Bin => {
            let mut w = BufWriter::new(File::create(&x_path)?);
            for x in xs {
                for i in 0..p {
                    for j in 0..q {
                        w.write_all(&x[(i, j)].to_le_bytes())?;
                    }
                }
            }
            w.flush()?;
        }
        Storage::Csv => {
            let mut w = csv::Writer::from_path(&x_path).map_err(|e| format_error("X.csv", e))?;
            let header: Vec<String> = (0..p).flat_map(|i| (0..q).map(move |j| format!("x_{}_{}", i + 1, j + 1))).collect();
            w.write_record(&header).map_err(|e| format_error("X.csv", e))?;
            for x in xs {
                let row: Vec<String> = (0..p).flat_map(|i| (0..q).map(move |j| x[(i, j)].to_string())).collect();
                w.write_record(&row).map_err(|e| format_error("X.csv", e))?;
            }
            w.flush()?;
        }
    }

    let mut w = csv::Writer::from_path(dir.join(&manifest.y_path)).map_err(|e| format_error("y.csv", e))?;
    match signal {
        Some(s) => {
            w.write_record(["y", "signal"]).map_err(|e| format_error("y.csv", e))?;
            for (a, b) in y.iter().zip(s) {
                w.write_record([a.to_string(), b.to_string()]).map_err(|e| format_error("y.csv", e))?;
            }
        }
        None => {
            w.write_record(["y"]).map_err(|e| format_error("y.csv", e))?;
            for a in y {
                w.write_record([a.to_string()]).map_err(|e| format_error("y.csv", e))?;
            }
        }
    }
    w.flush()?;

    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

fn parse_f64(field: &str, context: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| format_error(context, format!("{e} in {field:?}")))
}

/// Reads and validates a dataset directory; payload sizes must match the manifest exactly.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest: DatasetManifest = serde_json::from_reader(BufReader::new(File::open(dir.join(MANIFEST_FILE))?))?;
    manifest.validate()?;
    let DatasetManifest { n, p, q, .. } = manifest;
    let x_path = dir.join(&manifest.x_path);

    let xs = match manifest.storage {
        Storage::Bin => {
            let expected = n * p * q * 8;
            let len = fs::metadata(&x_path)?.len() as usize;
            if len != expected {
                return Err(NtsdrError::validation(
                    "x_path",
                    format!("payload has {len} bytes, manifest implies {expected}"),
                ));
            }
            let mut bytes = Vec::with_capacity(expected);
            File::open(&x_path)?.read_to_end(&mut bytes)?;
            bytes
                .chunks_exact(p * q * 8)
                .map(|chunk| {
                    Mat::from_row_iterator(
                        p,
                        q,
                        chunk.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk"))),
                    )
                })
                .collect::<Vec<_>>()
        }
        Storage::Csv => {
            let mut rdr = csv::Reader::from_path(&x_path).map_err(|e| format_error("predictor csv", e))?;
            let mut xs = Vec::with_capacity(n);
            for (row, rec) in rdr.records().enumerate() {
                let rec = rec.map_err(|e| format_error("predictor csv", e))?;
                if rec.len() != p * q {
                    return Err(NtsdrError::validation(
                        "x_path",
                        format!("row {} has {} fields, expected {}", row + 1, rec.len(), p * q),
                    ));
                }
                let vals = rec.iter().map(|f| parse_f64(f, "predictor csv")).collect::<Result<Vec<_>>>()?;
                xs.push(Mat::from_row_slice(p, q, &vals));
            }
            if xs.len() != n {
                return Err(NtsdrError::validation("x_path", format!("{} rows, manifest declares n = {n}", xs.len())));
            }
            xs
        }
    };
    if xs.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(NtsdrError::NonFinite("predictor payload".into()));
    }

    let mut rdr = csv::Reader::from_path(dir.join(&manifest.y_path)).map_err(|e| format_error("response csv", e))?;
    let headers = rdr.headers().map_err(|e| format_error("response csv", e))?.clone();
    let y_col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| NtsdrError::validation("y_path", "missing a `y` column"))?;
    let signal_col = headers.iter().position(|h| h == "signal");
    let mut y = Vec::with_capacity(n);
    let mut signal = signal_col.map(|_| Vec::with_capacity(n));
    for rec in rdr.records() {
        let rec = rec.map_err(|e| format_error("response csv", e))?;
        y.push(parse_f64(&rec[y_col], "response csv")?);
        if let (Some(c), Some(s)) = (signal_col, signal.as_mut()) {
            s.push(parse_f64(&rec[c], "response csv")?);
        }
    }
    if y.len() != n {
        return Err(NtsdrError::validation("y_path", format!("{} rows, manifest declares n = {n}", y.len())));
    }
    Ok(Dataset { manifest, xs, y, signal })
}

/// Any fitted estimator that can be saved.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum SavedModel {
    Tucker(TuckerModel),
    Cp(CpModel),
    Gsir(GsirModel),
}

impl From<FittedModel> for SavedModel {
    fn from(m: FittedModel) -> Self {
        match m {
            FittedModel::Tucker(t) => SavedModel::Tucker(t),
            FittedModel::Cp(c) => SavedModel::Cp(c),
        }
    }
}

impl SavedModel {
    pub fn method_name(&self) -> &'static str {
        match self {
            SavedModel::Tucker(_) => "tucker",
            SavedModel::Cp(_) => "cp",
            SavedModel::Gsir(_) => "gsir",
        }
    }

    pub fn input_shape(&self) -> (usize, usize) {
        match self {
            SavedModel::Tucker(m) => (m.training.p, m.training.q),
            SavedModel::Cp(m) => (m.training.p, m.training.q),
            SavedModel::Gsir(m) => (m.p, m.q),
        }
    }

    /// Predictor column names, ordered as [`SavedModel::predict`].
    pub fn column_names(&self) -> Vec<String> {
        match self {
            SavedModel::Tucker(m) => (1..=m.s).flat_map(|k| (1..=m.t).map(move |l| format!("f{k}g{l}"))).collect(),
            SavedModel::Cp(m) => (1..=m.d).map(|k| format!("pair{k}")).collect(),
            SavedModel::Gsir(m) => (1..=m.d).map(|k| format!("gsir{k}")).collect(),
        }
    }

    pub fn predict(&self, xs: &[Mat]) -> Result<Mat> {
        let (p, q) = self.input_shape();
        check_shapes(xs, p, q)?;
        if xs.is_empty() {
            return Ok(Mat::zeros(0, self.column_names().len()));
        }
        match self {
            SavedModel::Tucker(m) => FittedModel::Tucker(m.clone()).predict(xs),
            SavedModel::Cp(m) => FittedModel::Cp(m.clone()).predict(xs),
            SavedModel::Gsir(m) => evaluate_gsir(m, xs),
        }
    }
}

/// On-disk model: the estimator plus optional response maps fitted on its training data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub model: SavedModel,
    #[serde(default)]
    pub link: Option<LogLink>,
    #[serde(default)]
    pub regressor: Option<KernelRidge>,
}

impl ModelFile {
    pub fn new(model: SavedModel) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model,
            link: None,
            regressor: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(NtsdrError::validation(
                "format_version",
                format!("unsupported version {}, expected {MODEL_FORMAT_VERSION}", file.format_version),
            ));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// `Ŷ` from the link when present, otherwise from the post-hoc regressor.
    pub fn response(&self, predictors: &Mat) -> Result<Option<Vec<f64>>> {
        if predictors.nrows() == 0 {
            let mapped = self.link.is_some() || self.regressor.is_some();
            return Ok(mapped.then(Vec::new));
        }
        if let Some(link) = &self.link {
            return link.predict(predictors).map(Some);
        }
        if let Some(reg) = &self.regressor {
            return reg.predict(predictors).map(Some);
        }
        Ok(None)
    }
}
