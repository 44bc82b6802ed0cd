//! JSON records written next to every artifact: the resolved config, the
//! command and inputs that produced it, and artifact-specific metadata.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use plenumlab_core::autodiff::{AdamW, PlateauScheduler};
use plenumlab_core::dataprep::{LevelNorm, MinMaxNorm};
use plenumlab_core::models::{ForecasterKind, LossCurves};
use plenumlab_core::probes::FlowDataset;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::pfd;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub t_len: usize,
    pub t0: f64,
    pub dt_record: f64,
    pub fidelity: String,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Normalization {
    Level(LevelNorm),
    MinMax(MinMaxNorm),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Inpaint,
    Forecast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub task: Task,
    /// Forecaster family; absent for inpainting.
    pub forecaster: Option<ForecasterKind>,
    pub n_params: usize,
    pub normalization: Normalization,
    pub best_epoch: usize,
    pub best_val: Option<f64>,
    pub curves: CurveRecord,
    pub optimizer: AdamW,
    pub optimizer_steps: u64,
    pub scheduler: PlateauScheduler,
    /// Reason training stopped early, if it did.
    pub aborted: Option<String>,
}

/// Loss curves with non-finite entries stored as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveRecord {
    pub train: Vec<Option<f64>>,
    pub val: Vec<Option<f64>>,
    pub lr: Vec<f64>,
}

impl From<&LossCurves> for CurveRecord {
    fn from(c: &LossCurves) -> Self {
        let keep = |v: &[f64]| v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        Self { train: keep(&c.train), val: keep(&c.val), lr: c.lr.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    /// Artifact format, e.g. `PFD1`, `PTN1`, `CSV`.
    pub format: String,
    /// Subcommand that produced the artifact.
    pub command: String,
    /// Input artifacts, as given on the command line.
    pub inputs: Vec<String>,
    pub seed: u64,
    pub config_digest: String,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<CheckpointMeta>,
}

impl Sidecar {
    pub fn new(format: &str, command: &str, inputs: &[PathBuf], config: &RunConfig) -> Self {
        Self {
            format: format.to_string(),
            command: command.to_string(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            seed: config.seed,
            config_digest: config.digest(),
            config: config.clone(),
            dataset: None,
            checkpoint: None,
        }
    }

    pub fn write(&self, artifact: &Path) -> Result<()> {
        let path = sidecar_path(artifact);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Reads a sidecar given either its own path or its artifact's path.
    pub fn read(path: &Path) -> Result<Self> {
        let path = if path.extension().is_some_and(|e| e == "json") { path.to_path_buf() } else { sidecar_path(path) };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let s: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        s.config.validate()?;
        Ok(s)
    }
}

/// `<artifact>.json`, or `<dir>/sidecar.json` for directory artifacts.
pub fn sidecar_path(artifact: &Path) -> PathBuf {
    if artifact.is_dir() {
        return artifact.join("sidecar.json");
    }
    let mut s = artifact.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl DatasetMeta {
    pub fn of(ds: &FlowDataset) -> Self {
        Self { t_len: ds.t_len, t0: ds.t0, dt_record: ds.dt_record, fidelity: ds.fidelity.clone(), provenance: ds.provenance.clone() }
    }
}

/// Writes a dataset and its sidecar.
pub fn write_dataset(ds: &FlowDataset, path: &Path, mut sidecar: Sidecar) -> Result<()> {
    pfd::write(ds, path)?;
    sidecar.dataset = Some(DatasetMeta::of(ds));
    sidecar.write(path)
}

/// Reads a dataset, taking time metadata and labels from its sidecar when
/// one exists.
pub fn read_dataset(path: &Path) -> Result<FlowDataset> {
    let mut ds = pfd::read(path)?;
    if sidecar_path(path).is_file() {
        let meta = Sidecar::read(path)?
            .dataset
            .ok_or_else(|| Error::Format(format!("{}: sidecar has no dataset section", path.display())))?;
        if meta.t_len != ds.t_len {
            return Err(Error::DimensionMismatch {
                path: path.to_path_buf(),
                what: format!("sidecar records {} snapshots, file holds {}", meta.t_len, ds.t_len),
            });
        }
        ds.t0 = meta.t0;
        ds.dt_record = meta.dt_record;
        ds.fidelity = meta.fidelity;
        ds.provenance = meta.provenance;
    }
    Ok(ds)
}
