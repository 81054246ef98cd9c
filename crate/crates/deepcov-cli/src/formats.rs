//! File formats: RFC-4180 CSV with '.' decimal separator and full
//! round-trip f64 formatting, JSON manifests, moment exports and RBM
//! checkpoints.

use std::fs;
use std::path::{Path, PathBuf};

use deepcov_core::meanfield::LayerMoments;
use deepcov_core::rbm::RbmModel;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

/// Manifest written at the root of every run directory.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub kind: &'static str,
    pub seed: u64,
    pub quad_order: usize,
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a ExperimentConfig,
}

pub fn write_manifest(dir: &Path, config: &ExperimentConfig) -> Result<()> {
    let manifest = RunManifest {
        kind: config.kind(),
        seed: config.common().seed,
        quad_order: config.common().quad_order,
        tool: "deepcov",
        version: env!("CARGO_PKG_VERSION"),
        config,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(CliError::io(&path))?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(CliError::io(path))?;
    Ok(csv::WriterBuilder::new().from_writer(file))
}

/// Write a matrix as plain numeric CSV, one row per record.
pub fn write_matrix_csv(path: &Path, matrix: &DMatrix<f64>) -> Result<()> {
    let mut w = csv_writer(path)?;
    for i in 0..matrix.nrows() {
        let row: Vec<String> = (0..matrix.ncols())
            .map(|j| format!("{}", matrix[(i, j)]))
            .collect();
        w.write_record(&row).map_err(CliError::csv(path))?;
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(CliError::csv(path))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(CliError::csv(path))?;
        let row = record
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| CliError::Config(format!("{}: bad float {s:?}: {e}", path.display())))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Config(format!("{}: empty matrix", path.display())));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Config(format!(
            "{}: ragged rows",
            path.display()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Export one layer's moments as `<prefix>_mean.csv` (single column) and
/// `<prefix>_cov.csv` (square matrix).
pub fn write_moments_csv(dir: &Path, prefix: &str, moments: &LayerMoments) -> Result<()> {
    let mean = DMatrix::from_fn(moments.dim(), 1, |i, _| moments.mean()[i]);
    write_matrix_csv(&dir.join(format!("{prefix}_mean.csv")), &mean)?;
    write_matrix_csv(&dir.join(format!("{prefix}_cov.csv")), moments.cov())
}

pub fn read_moments_csv(dir: &Path, prefix: &str) -> Result<LayerMoments> {
    let mean = read_matrix_csv(&dir.join(format!("{prefix}_mean.csv")))?;
    let cov = read_matrix_csv(&dir.join(format!("{prefix}_cov.csv")))?;
    let mean = DVector::from_fn(mean.nrows(), |i, _| mean[(i, 0)]);
    Ok(LayerMoments::new(mean, cov)?)
}

#[derive(Debug, Serialize, serde::Deserialize)]
struct ModelManifest {
    n_visible: usize,
    n_hidden: usize,
    weights: String,
    visible_bias: String,
    hidden_bias: String,
}

/// RBM checkpoint: JSON manifest plus CSV payloads in `dir`.
pub fn write_model_checkpoint(dir: &Path, model: &RbmModel) -> Result<()> {
    ensure_dir(dir)?;
    let manifest = ModelManifest {
        n_visible: model.n_visible(),
        n_hidden: model.n_hidden(),
        weights: "weights.csv".into(),
        visible_bias: "visible_bias.csv".into(),
        hidden_bias: "hidden_bias.csv".into(),
    };
    let path = dir.join("model.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .map_err(CliError::io(&path))?;
    write_matrix_csv(&dir.join("weights.csv"), &model.weights)?;
    let vb = DMatrix::from_fn(model.n_visible(), 1, |i, _| model.visible_bias[i]);
    let hb = DMatrix::from_fn(model.n_hidden(), 1, |i, _| model.hidden_bias[i]);
    write_matrix_csv(&dir.join("visible_bias.csv"), &vb)?;
    write_matrix_csv(&dir.join("hidden_bias.csv"), &hb)?;
    Ok(())
}

pub fn read_model_checkpoint(dir: &Path) -> Result<RbmModel> {
    let path = dir.join("model.json");
    let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
    let manifest: ModelManifest = serde_json::from_str(&text)?;
    let weights = read_matrix_csv(&dir.join(&manifest.weights))?;
    let vb = read_matrix_csv(&dir.join(&manifest.visible_bias))?;
    let hb = read_matrix_csv(&dir.join(&manifest.hidden_bias))?;
    let model = RbmModel::new(
        weights,
        DVector::from_fn(vb.nrows(), |i, _| vb[(i, 0)]),
        DVector::from_fn(hb.nrows(), |i, _| hb[(i, 0)]),
    )?;
    if model.n_visible() != manifest.n_visible || model.n_hidden() != manifest.n_hidden {
        return Err(CliError::Config(format!(
            "{}: payload dimensions disagree with manifest",
            dir.display()
        )));
    }
    Ok(model)
}

/// Dataset file: one sample per row.
pub fn write_dataset_csv(path: &Path, data: &DMatrix<f64>) -> Result<()> {
    write_matrix_csv(path, &data.transpose())
}

/// Serialize any record table to `path` with a header row.
pub fn write_table<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    let file = fs::File::create(path).map_err(CliError::io(path))?;
    let mut w = csv::WriterBuilder::new().from_writer(file);
    for row in rows {
        w.serialize(row).map_err(CliError::csv(path))?;
    }
    w.flush().map_err(CliError::io(path))?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(CliError::io(path))?;
    Ok(())
}

/// A run directory with the standard layout.
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path, config: &ExperimentConfig) -> Result<Self> {
        ensure_dir(root)?;
        write_manifest(root, config)?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn subdir(&self, name: &str) -> Result<PathBuf> {
        let dir = self.root.join(name);
        ensure_dir(&dir)?;
        Ok(dir)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}
