//! Flat key-value configuration file (TOML sections, lowercase snake case
//! keys). Command-line flags override file values; every resolved numeric
//! parameter is validated by the owning module before dispatch.

use std::path::Path;

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub eigen: EigenSection,
    #[serde(default)]
    pub numeraire: NumeraireSection,
    #[serde(default)]
    pub arbitrage: ArbitrageSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub example: Option<String>,
    pub covariance: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub orders: Option<[f64; 2]>,
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub t: Option<f64>,
    pub dt: Option<f64>,
    pub paths: Option<usize>,
    pub absorb_level: Option<usize>,
    pub record_stride: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenSection {
    pub epsilons: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub x0: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumeraireSection {
    pub candidate: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArbitrageSection {
    pub t: Option<f64>,
    pub horizons: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub drifts: Option<Vec<String>>,
    pub compact_level: Option<usize>,
}

pub fn load(path: &Path) -> anyhow::Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cli: cannot read config file {}", path.display()))?;
    toml::from_str(&text)
        .with_context(|| format!("cli: cannot parse config file {}", path.display()))
}
