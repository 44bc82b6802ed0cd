//! Run configuration: strict JSON with defaults for every key, overridable
//! through dotted `key=value` assignments.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use plenumlab_core::dataprep::{SynthConfig, SynthKind};
use plenumlab_core::geometry::DomainConfig;
use plenumlab_core::meshstudy::{mesh_triplet, ErrorMode, Reference};
use plenumlab_core::models::{ConvLstmConfig, DeepONetConfig, ForecasterKind, InpaintConfig, LstmConfig, TrainConfig};
use plenumlab_core::solver::{FluidProps, PorousCoeffs, SolverSettings, SwirlSettings, TransientConfig, TurbConstants};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    #[default]
    Fine,
    Medium,
    Coarse,
}

impl Fidelity {
    pub fn label(self) -> &'static str {
        match self {
            Fidelity::Fine => "fine",
            Fidelity::Medium => "medium",
            Fidelity::Coarse => "coarse",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub kind: SynthKind,
    pub t_len: usize,
    pub params: SynthConfig,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { kind: SynthKind::Drift, t_len: 2000, params: SynthConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskSection {
    /// Checkerboard parity, 0 or 1.
    pub phase: u8,
}

impl Default for MaskSection {
    fn default() -> Self {
        Self { phase: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InpaintSection {
    /// Dataset layers reconstructed jointly, bottom first.
    pub levels: Vec<usize>,
    pub splits: [f64; 3],
    pub coord_channels: bool,
    pub net: InpaintConfig,
}

impl Default for InpaintSection {
    fn default() -> Self {
        Self { levels: vec![0, 1, 2, 3], splits: [0.45, 0.10, 0.45], coord_channels: false, net: InpaintConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastSection {
    pub kind: ForecasterKind,
    /// Dataset layer whose assembly flows are forecast.
    pub layer: usize,
    pub splits: [f64; 3],
    /// Test steps scored by `eval`, counted back from the end of the split.
    pub eval_window: usize,
    pub lstm: LstmConfig,
    pub convlstm: ConvLstmConfig,
    pub deeponet: DeepONetConfig,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self {
            kind: ForecasterKind::ConvLstm,
            layer: 0,
            splits: [0.6, 0.2, 0.2],
            eval_window: 5000,
            lstm: LstmConfig::default(),
            convlstm: ConvLstmConfig::default(),
            deeponet: DeepONetConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshStudySection {
    pub reference: Reference,
    pub mode: ErrorMode,
}

impl Default for MeshStudySection {
    fn default() -> Self {
        Self { reference: Reference::A, mode: ErrorMode::Max }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub fidelity: Fidelity,
    pub domain: DomainConfig,
    pub fluid: FluidProps,
    pub turbulence: TurbConstants,
    pub porous: PorousCoeffs,
    pub swirl: SwirlSettings,
    pub solver: SolverSettings,
    pub transient: TransientConfig,
    pub synth: SynthSection,
    pub mask: MaskSection,
    pub inpaint: InpaintSection,
    pub forecast: ForecastSection,
    pub train: TrainConfig,
    pub meshstudy: MeshStudySection,
}

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies `KEY=VALUE`
    /// overrides in order and validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                if !p.is_file() {
                    return Err(Error::ConfigNotFound(p.to_path_buf()));
                }
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str::<Value>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.mask.phase > 1 {
            return bad(format!("mask.phase must be 0 or 1, got {}", self.mask.phase));
        }
        if self.inpaint.levels.is_empty() {
            return bad("inpaint.levels must not be empty".into());
        }
        if let Some(l) = self.inpaint.levels.iter().chain([&self.forecast.layer]).find(|l| **l >= plenumlab_core::probes::LAYERS) {
            return bad(format!("layer {l} is outside 0..9"));
        }
        if self.train.batch_size == 0 {
            return bad("train.batch_size must be positive".into());
        }
        if !(self.train.plateau_factor > 0.0 && self.train.plateau_factor < 1.0) || self.train.plateau_patience == 0 {
            return bad("train.plateau_factor must lie in (0, 1) and train.plateau_patience must be positive".into());
        }
        Ok(())
    }

    /// Domain of the configured fidelity.
    pub fn resolved_domain(&self) -> DomainConfig {
        mesh_triplet(&self.domain)[self.fidelity.index()].clone()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&bytes);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Sets the dotted `key` in `root` to `value`, parsed as JSON when possible
/// and as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got {assignment:?}")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Usage(format!("malformed key {key:?}")));
    }
    let parsed = serde_json::from_str::<Value>(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(m) => m,
            _ => return Err(Error::Usage(format!("{} is not a section", parts[..i].join(".")))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = RunConfig::default();
        let v = serde_json::to_value(&cfg).unwrap();
        assert_eq!(RunConfig::from_value(v).unwrap(), cfg);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let cfg = RunConfig::load(None, &["solver.dt=0.001".into(), "synth.kind=noise".into(), "seed=9".into()]).unwrap();
        assert_eq!(cfg.solver.dt, 0.001);
        assert_eq!(cfg.synth.kind, SynthKind::Noise);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::load(None, &["solver.dtt=1".into()]), Err(Error::Config(_))));
        assert!(matches!(RunConfig::load(None, &["bogus=1".into()]), Err(Error::Config(_))));
        assert!(matches!(RunConfig::load(None, &["seed".into()]), Err(Error::Usage(_))));
    }

    #[test]
    fn missing_config_is_a_usage_error() {
        let e = RunConfig::load(Some(Path::new("/nonexistent/missing.json")), &[]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("config not found"));
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
    }
}
