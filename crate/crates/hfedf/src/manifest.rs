//! Run manifest: everything needed to reproduce a run bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use hfedf_core::federation::{Algorithm, CellOutcome, SignMode, StreamLabels};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellState {
    Ok,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellStatus {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub target_domain: usize,
    pub status: CellState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// How random streams are derived; the per-target labels are listed in
/// `labels` with `{t}` standing for the target domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamInfo {
    pub generator: String,
    pub derivation: String,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub decisions: BTreeMap<String, String>,
    pub streams: StreamInfo,
    pub cells: Vec<CellStatus>,
    pub files: Vec<String>,
}

fn decisions(cfg: &ExperimentConfig) -> BTreeMap<String, String> {
    let sign = match cfg.hfedf.gradalign_sign {
        SignMode::Plain => "softmax(cos)",
        SignMode::Negated => "softmax(-cos)",
    };
    [
        ("precision", "f64 throughout".to_string()),
        (
            "init.linear",
            "weights and biases uniform in +-1/sqrt(fan_in)".to_string(),
        ),
        ("init.embeddings", "standard normal".to_string()),
        (
            "hypernet.activation",
            format!("leaky relu, slope {}", cfg.hypernet.leaky_slope),
        ),
        ("gradalign.weights", sign.to_string()),
        (
            "gradalign.embeddings",
            "cosines over full N x L vectors, zero outside the client's row".to_string(),
        ),
        (
            "gradalign.zero_vector_cosine",
            "0 when either norm < 1e-15".to_string(),
        ),
        (
            "server.update",
            "theta -= lr * J^T (phi_start - phi_end), a descent step".to_string(),
        ),
        (
            "server.weight_decay_on_embeddings",
            cfg.hfedf.decay_embeddings.to_string(),
        ),
        (
            "ema",
            "shadow set at round == warmup, then shadow = decay * current + (1 - decay) * shadow"
                .to_string(),
        ),
        (
            "split.remainders",
            "largest domains get the extra part, ties by lower domain id; part sizes within 1"
                .to_string(),
        ),
        (
            "split.assignment",
            "round-robin deal of parts, then shuffled client order".to_string(),
        ),
        (
            "holdout",
            "stratified per class, largest remainder, total round(frac * n)".to_string(),
        ),
        ("accuracy.ties", "lowest class index wins".to_string()),
        (
            "id_accuracy",
            "unweighted mean over client validation sets".to_string(),
        ),
        (
            "ood_accuracy.per_client_models",
            "mean over clients of each client's target accuracy".to_string(),
        ),
        ("fedavg.weights", "client dataset sizes".to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn stream_info(n_clients: usize) -> StreamInfo {
    let labels = StreamLabels::all("{t}", n_clients);
    StreamInfo {
        generator: "ChaCha8".to_string(),
        derivation: "seed_from_u64(cell seed), stream = FNV-1a 64 of the label".to_string(),
        labels,
    }
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig, cells: &[CellOutcome], files: Vec<String>) -> Self {
        let cfg = cfg.resolved();
        let cells = cells
            .iter()
            .map(|c| CellStatus {
                algorithm: c.key.algorithm,
                seed: c.key.seed,
                target_domain: c.key.target_domain,
                status: if c.aborted.is_some() {
                    CellState::Aborted
                } else {
                    CellState::Ok
                },
                reason: c.aborted.clone(),
            })
            .collect();
        RunManifest {
            format_version: FORMAT_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            decisions: decisions(&cfg),
            streams: stream_info(cfg.n_clients()),
            config: cfg,
            cells,
            files,
        }
    }

    pub fn aborted(&self) -> impl Iterator<Item = &CellStatus> {
        self.cells.iter().filter(|c| c.status == CellState::Aborted)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let manifest: RunManifest =
            serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::invalid(
                "format_version",
                format!("unsupported manifest version {}", manifest.format_version),
            ));
        }
        manifest.config.validate()?;
        Ok(manifest)
    }
}
