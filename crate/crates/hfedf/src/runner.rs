//! Grid execution across worker threads with deterministic output order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use hfedf_core::federation::{grid, run_cell, CellOutcome, RunOptions};
use hfedf_core::metrics::ResultTable;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::output;

#[derive(Debug, Clone)]
pub struct RunReport {
    pub table: ResultTable,
    /// In canonical grid order regardless of `jobs`.
    pub cells: Vec<CellOutcome>,
}

/// Runs every `(algorithm, seed, target)` cell on up to `jobs` threads.
/// Cells are independent, and each result lands in its grid slot, so the
/// report does not depend on scheduling.
pub fn run_grid(cfg: &ExperimentConfig, jobs: usize) -> Result<RunReport> {
    cfg.validate()?;
    let plan = cfg.plan();
    let keys = grid(&plan, &cfg.algorithms, &cfg.seeds);
    let opts = RunOptions {
        collect_traces: true,
        collect_confidences: cfg.collect_confidences,
    };
    let slots: Vec<Mutex<Option<hfedf_core::Result<CellOutcome>>>> =
        keys.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = jobs.clamp(1, keys.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&key) = keys.get(i) else { break };
                let outcome = run_cell(&plan, key, opts);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(outcome);
            });
        }
    });
    let mut cells = Vec::with_capacity(keys.len());
    for slot in slots {
        let outcome = slot
            .into_inner()
            .unwrap_or_else(|e| e.into_inner())
            .expect("every grid slot is filled once the scope ends");
        cells.push(outcome?);
    }
    let rows = cells.iter().flat_map(|c| c.rows.iter().cloned()).collect();
    Ok(RunReport {
        table: ResultTable { rows },
        cells,
    })
}

/// Runs the grid and writes results, traces, divergence, optional
/// confidences, the resolved config and the manifest into `dir`.
pub fn run_to_dir(
    cfg: &ExperimentConfig,
    dir: &std::path::Path,
    jobs: usize,
) -> Result<RunManifest> {
    let report = run_grid(cfg, jobs)?;
    let mut files = output::write_run(dir, &report.cells, cfg.collect_confidences)?;
    let resolved = cfg.resolved();
    let path = dir.join(output::CONFIG_FILE);
    std::fs::write(&path, resolved.to_toml()?).map_err(|e| Error::io(&path, e))?;
    files.push(output::CONFIG_FILE.to_string());
    files.push(MANIFEST_FILE.to_string());
    let manifest = RunManifest::new(cfg, &report.cells, files);
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.to_json()? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
