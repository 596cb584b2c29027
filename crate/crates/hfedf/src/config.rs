//! Declarative experiment configuration in TOML.

use std::path::{Path, PathBuf};

use hfedf_core::data::{SyntheticSpec, DEFAULT_HOLDOUT_FRAC};
use hfedf_core::federation::{Algorithm, BaselineConfig, ExperimentPlan, HFedFConfig, HyperSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Defaults to one client per source domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_clients: Option<usize>,
    /// Distinct source domains per client.
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub few_shot_shots: usize,
    #[serde(default = "default_holdout")]
    pub holdout_frac: f64,
    #[serde(default = "default_hidden")]
    pub client_hidden: Vec<usize>,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub collect_confidences: bool,
    #[serde(default)]
    pub data: SyntheticSpec,
    #[serde(default)]
    pub hypernet: HyperSpec,
    #[serde(default)]
    pub hfedf: HFedFConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![
        Algorithm::Hfedf,
        Algorithm::Fedavg,
        Algorithm::Fedprox,
        Algorithm::Local,
        Algorithm::Central,
    ]
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}
fn default_d() -> usize {
    1
}
fn default_holdout() -> f64 {
    DEFAULT_HOLDOUT_FRAC
}
fn default_hidden() -> Vec<usize> {
    vec![32]
}
fn default_eval_interval() -> usize {
    5
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithms: default_algorithms(),
            seeds: default_seeds(),
            n_clients: None,
            d: default_d(),
            few_shot_shots: 0,
            holdout_frac: default_holdout(),
            client_hidden: default_hidden(),
            eval_interval: default_eval_interval(),
            output_dir: None,
            collect_confidences: false,
            data: SyntheticSpec::default(),
            hypernet: HyperSpec::default(),
            hfedf: HFedFConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

/// Prefixes a core configuration error with the table it came from.
fn scoped(section: &str, e: hfedf_core::Error) -> Error {
    match e {
        hfedf_core::Error::Config { field, reason } => {
            let field = if section.is_empty() {
                field.to_string()
            } else {
                format!("{section}.{field}")
            };
            Error::invalid(field, reason)
        }
        other => Error::Core(other),
    }
}

impl ExperimentConfig {
    pub fn n_clients(&self) -> usize {
        self.n_clients
            .unwrap_or(self.data.n_domains.saturating_sub(1))
    }

    pub fn plan(&self) -> ExperimentPlan {
        ExperimentPlan {
            data: self.data.clone(),
            n_clients: self.n_clients(),
            domains_per_client: self.d,
            few_shot_shots: self.few_shot_shots,
            holdout_frac: self.holdout_frac,
            client_hidden: self.client_hidden.clone(),
            hypernet: self.hypernet.clone(),
            hfedf: self.hfedf.clone(),
            baseline: self.baseline.clone(),
            eval_interval: self.eval_interval,
        }
    }

    /// Fills in derived values so the config no longer depends on defaults.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut out = self.clone();
        out.n_clients = Some(self.n_clients());
        out.hypernet.embed_dim = Some(self.hypernet.resolve(self.n_clients()).embed_dim);
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::invalid(
                "algorithms",
                "must list at least one algorithm",
            ));
        }
        let mut algs = self.algorithms.clone();
        algs.sort();
        algs.dedup();
        if algs.len() != self.algorithms.len() {
            return Err(Error::invalid("algorithms", "contains duplicates"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "must list at least one seed"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::invalid("seeds", "contains duplicates"));
        }
        self.data.validate().map_err(|e| scoped("data", e))?;
        self.hfedf.validate().map_err(|e| scoped("hfedf", e))?;
        self.baseline
            .validate()
            .map_err(|e| scoped("baseline", e))?;
        self.hypernet
            .validate()
            .map_err(|e| scoped("hypernet", e))?;
        self.plan().validate().map_err(|e| scoped("", e))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("toml: {e}")))
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_config(&text)
    }
}

/// Parses and validates a TOML experiment config. Errors carry the
/// dotted path of the offending field.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Parse {
        path: String::from("."),
        message: e.message().to_string(),
    })?;
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}
