//! Run configuration. See `docs/config.md` for the grammar.

use std::path::{Path, PathBuf};

use csbm::synthgen::GenSpec;
use csbm::{Execution, FamilySpec, Kind, Modality, PartitionPrior};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Output directory, relative to the config file.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenSpec>,
    /// Block families; defaults to the conjugate family of the modality.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PartitionPrior>,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select_k: Option<SelectKSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub kind: Kind,
    pub modality: Modality,
    /// One edge list per layer.
    pub layers: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// `index<TAB>label` file with 1-based labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    /// `index<TAB>name` file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitChoice {
    Random,
    Singleton,
    Truth,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_chains: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<InitChoice>,
    pub allow_new_cluster: bool,
    pub argmax: bool,
    pub check_every: usize,
    pub execution: Execution,
    pub level: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            sweeps: 1000,
            burn_in: 200,
            thin: 1,
            seed: 1,
            n_chains: 1,
            init: None,
            allow_new_cluster: true,
            argmax: false,
            check_every: 100,
            execution: Execution::default(),
            level: 0.95,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectKSection {
    pub ks: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    /// `node,cluster` CSV as written by `fit` (1-based clusters).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree_corrected: Option<GammaPrior>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaPrior {
    pub a: f64,
    pub b: f64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
